//! Point-cloud observations: featurized scene and object clouds, and the
//! per-step local context built around the object at its current pose.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{ConvexBody, GeomError, Pose9, SurfaceSampler, FaceFilter};
use crate::scenes::SceneSpec;
use crate::statics::{normalize_robustness, robustness_field, StaticsError};

pub const SCENE_POINTS: usize = 1024;
pub const OBJECT_POINTS: usize = 1024;
pub const DEFAULT_K: usize = 8;
pub const DEFAULT_M: usize = 512;

/// Scene surface point: position, normal, one-hot `(1, 0)` and the
/// normalized robustness feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePoint {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub feature: f64,
}

impl ScenePoint {
    pub const WIDTH: usize = 9;

    pub fn to_array(&self) -> [f64; 9] {
        let (p, n) = (self.position, self.normal);
        [p.x, p.y, p.z, n.x, n.y, n.z, 1.0, 0.0, self.feature]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            position: Vector3::new(v[0], v[1], v[2]),
            normal: Vector3::new(v[3], v[4], v[5]),
            feature: v[8],
        }
    }
}

/// Object surface point in the body frame: position, normal, one-hot
/// `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectPoint {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl ObjectPoint {
    pub const WIDTH: usize = 8;

    pub fn to_array(&self) -> [f64; 8] {
        let (p, n) = (self.position, self.normal);
        [p.x, p.y, p.z, n.x, n.y, n.z, 0.0, 1.0]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            position: Vector3::new(v[0], v[1], v[2]),
            normal: Vector3::new(v[3], v[4], v[5]),
        }
    }
}

/// Samples the scene cloud with robustness features and the object cloud in
/// its body frame.
pub fn featurize(
    scene: &SceneSpec,
    object: &ConvexBody,
    seed: u64,
) -> Result<(Vec<ScenePoint>, Vec<ObjectPoint>), StaticsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = scene.surface_sampler().sample(SCENE_POINTS, &mut rng);
    let field = robustness_field(&scene.all_bodies(), &samples, &scene.statics_config())?;
    let scene_cloud = samples
        .iter()
        .zip(&field)
        .map(|(s, r)| ScenePoint {
            position: s.position,
            normal: s.normal,
            feature: normalize_robustness(r.value),
        })
        .collect();
    let local = object.clone().with_pose(Pose9::identity());
    let object_cloud = SurfaceSampler::new([(&local, FaceFilter::All)])
        .sample(OBJECT_POINTS, &mut rng)
        .into_iter()
        .map(|s| ObjectPoint { position: s.position, normal: s.normal })
        .collect();
    Ok((scene_cloud, object_cloud))
}

/// Conditioning input at one denoising step, expressed relative to the
/// centroid of the selected scene context.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub scene: Vec<ScenePoint>,
    /// Object points at the pose (normals rotated), then centred.
    pub object: Vec<ObjectPoint>,
    pub centroid: Vector3<f64>,
}

/// Indices of the `k` nearest scene points to each transformed object
/// point, merged and ordered by their smallest distance to the object.
fn knn_union(scene: &[ScenePoint], object: &[Vector3<f64>], k: usize) -> Vec<usize> {
    let k = k.min(scene.len());
    let mut best = vec![f64::INFINITY; scene.len()];
    let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for o in object {
        heap.clear();
        for (j, s) in scene.iter().enumerate() {
            let d = (s.position - o).norm_squared();
            if heap.len() == k && d >= heap[k - 1].0 {
                continue;
            }
            let at = heap.partition_point(|&(hd, _)| hd <= d);
            heap.insert(at, (d, j));
            heap.truncate(k);
        }
        for &(d, j) in &heap {
            if d < best[j] {
                best[j] = d;
            }
        }
    }
    let mut union: Vec<usize> = (0..scene.len()).filter(|&j| best[j].is_finite()).collect();
    union.sort_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)));
    union
}

/// Builds the observation for `pose`: k-nearest scene points per object
/// point, truncated or cyclically padded to `m`, and everything centred on
/// the context centroid.
pub fn local_context(
    scene: &[ScenePoint],
    object: &[ObjectPoint],
    pose: &Pose9,
    k: usize,
    m: usize,
) -> Result<Observation, GeomError> {
    let r = pose.rotation()?;
    let moved: Vec<Vector3<f64>> = object.iter().map(|o| r * o.position + pose.translation).collect();
    let union = knn_union(scene, &moved, k);
    let mut context: Vec<ScenePoint> = if union.is_empty() {
        Vec::new()
    } else {
        (0..m).map(|i| scene[union[i % union.len()]]).collect()
    };
    let centroid = if context.is_empty() {
        Vector3::zeros()
    } else {
        context.iter().map(|s| s.position).sum::<Vector3<f64>>() / context.len() as f64
    };
    for s in &mut context {
        s.position -= centroid;
    }
    let object = object
        .iter()
        .zip(&moved)
        .map(|(o, p)| ObjectPoint { position: p - centroid, normal: r * o.normal })
        .collect();
    Ok(Observation { scene: context, object, centroid })
}
