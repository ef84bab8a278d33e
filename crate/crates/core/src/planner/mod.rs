//! Placement validation, the expert contact-point planner and dataset
//! generation.

mod dataset;

pub use dataset::{
    generate_dataset, read_dataset, write_dataset, DatasetHeader, DatasetOptions, ObjectSpec, PlacementRecord,
    DATASET_FORMAT, DATASET_VERSION,
};

use std::time::Instant;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::ScenePoint;
use crate::geom::{classify_proximity_with, ConvexBody, FaceFilter, GeomError, Pose9, SurfaceSampler, EPS_CONTACT};
use crate::scenes::{SceneError, SceneSpec};
use crate::statics::{detect_contacts, equilibrium_feasible, robustness_field, StaticsError};

#[derive(Debug, thiserror::Error)]
pub enum PlannerError {
    #[error("no valid placement within {budget} proposals")]
    Exhausted { budget: usize },
    #[error("scene {scene}, record {record}: no valid placement within {budget} proposals")]
    RecordExhausted { scene: String, record: usize, budget: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Statics(#[from] StaticsError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("dataset format error: {0}")]
    DataFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub contact_eps: f64,
    /// Size of the post-placement robustness field; `None` skips it.
    pub robustness_points: Option<usize>,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { contact_eps: EPS_CONTACT, robustness_points: Some(1024), seed: 0 }
    }
}

impl ValidationConfig {
    /// Validity only, no robustness field.
    pub fn quick() -> Self {
        Self { robustness_points: None, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementOutcome {
    pub pose: Pose9,
    pub stable: bool,
    pub penetration_free: bool,
    pub min_robustness: Option<f64>,
    pub median_robustness: Option<f64>,
    pub wall_time: f64,
}

impl PlacementOutcome {
    pub fn valid(&self) -> bool {
        self.stable && self.penetration_free
    }
}

/// Minimum and lower median, with `+∞` ordered greatest.
pub fn min_median(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some((v[0], v[(v.len() - 1) / 2]))
}

/// Checks penetration and static equilibrium of `object` placed at `pose`
/// in `scene`; for valid placements also summarizes a fresh robustness
/// field of the resulting scene.
pub fn validate_placement(
    scene: &SceneSpec,
    object: &ConvexBody,
    pose: &Pose9,
    config: &ValidationConfig,
) -> Result<PlacementOutcome, GeomError> {
    let start = Instant::now();
    let pose = pose.orthogonalized()?;
    let placed = object.clone().with_pose(pose).with_id("object");
    let bodies = scene.with_object(placed);
    let obj = bodies.last().expect("object was appended");
    let penetration_free = bodies[..bodies.len() - 1]
        .iter()
        .all(|b| !classify_proximity_with(b, obj, config.contact_eps).is_penetrating());

    let statics = crate::statics::StaticsConfig { contact_eps: config.contact_eps, ..scene.statics_config() };
    let stable = penetration_free && {
        match detect_contacts(&bodies, config.contact_eps) {
            Ok(contacts) => {
                let n = bodies.len() - 1;
                if !contacts.iter().any(|c| c.body_a == n || c.body_b == n) {
                    false
                } else {
                    equilibrium_feasible(&bodies, &contacts, None, &statics).unwrap_or_else(|e| {
                        log::warn!("equilibrium check failed, treating as unstable: {e}");
                        false
                    })
                }
            }
            Err(_) => false,
        }
    };

    let mut outcome = PlacementOutcome {
        pose,
        stable,
        penetration_free,
        min_robustness: None,
        median_robustness: None,
        wall_time: 0.0,
    };
    if let (true, Some(n)) = (outcome.valid(), config.robustness_points) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let sampler = SurfaceSampler::new(
            std::iter::once((&bodies[0], FaceFilter::Upward)).chain(bodies[1..].iter().map(|b| (b, FaceFilter::All))),
        );
        let samples = sampler.sample(n, &mut rng);
        match robustness_field(&bodies, &samples, &statics) {
            Ok(field) => {
                let values: Vec<f64> = field.iter().map(|f| f.value).collect();
                if let Some((min, median)) = min_median(&values) {
                    outcome.min_robustness = Some(min);
                    outcome.median_robustness = Some(median);
                }
            }
            Err(e) => log::warn!("post-placement robustness field failed: {e}"),
        }
    }
    outcome.wall_time = start.elapsed().as_secs_f64();
    Ok(outcome)
}

/// Rotation taking `+z` to the unit vector `n`.
fn align_z_to(n: &Vector3<f64>) -> Matrix3<f64> {
    let z = Vector3::z();
    let axis = z.cross(n);
    let s = axis.norm();
    let c = z.dot(n);
    if s < 1e-12 {
        return if c > 0.0 { Matrix3::identity() } else { Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)) };
    }
    Rotation3::from_axis_angle(&Unit::new_normalize(axis), s.atan2(c)).into_inner()
}

/// Samples scene contact points in proportion to their robustness feature
/// and drops the object's bottom face onto them.
pub struct ExpertPlanner<'a> {
    scene: &'a SceneSpec,
    object: &'a ConvexBody,
    points: &'a [ScenePoint],
    cumulative: Vec<f64>,
    bottom: Vec<[Vector3<f64>; 3]>,
    bottom_cumulative: Vec<f64>,
    pub validation: ValidationConfig,
}

impl<'a> ExpertPlanner<'a> {
    /// `points` is the featurized scene cloud.
    pub fn new(scene: &'a SceneSpec, object: &'a ConvexBody, points: &'a [ScenePoint]) -> Self {
        let mut acc = 0.0;
        let cumulative = points
            .iter()
            .map(|p| {
                acc += if p.feature.is_nan() { 0.0 } else { p.feature.clamp(0.0, 1.0) };
                acc
            })
            .collect();
        let face = (0..object.faces.len())
            .min_by(|&a, &b| object.face_normal_local(a).z.total_cmp(&object.face_normal_local(b).z))
            .expect("object has faces");
        let verts: Vec<_> = object.faces[face].iter().map(|&i| object.vertices[i]).collect();
        let bottom: Vec<[Vector3<f64>; 3]> = verts[1..].windows(2).map(|w| [verts[0], w[0], w[1]]).collect();
        let mut acc = 0.0;
        let bottom_cumulative = bottom
            .iter()
            .map(|[a, b, c]| {
                acc += (b - a).cross(&(c - a)).norm();
                acc
            })
            .collect();
        Self {
            scene,
            object,
            points,
            cumulative,
            bottom,
            bottom_cumulative,
            validation: ValidationConfig::quick(),
        }
    }

    /// One candidate pose drawn from `rng`.
    pub fn propose(&self, rng: &mut impl Rng) -> Pose9 {
        let pick = |cum: &[f64], u: f64| cum.partition_point(|&c| c <= u * cum[cum.len() - 1]).min(cum.len() - 1);
        let s = &self.points[pick(&self.cumulative, rng.random())];
        let [a, b, c] = self.bottom[pick(&self.bottom_cumulative, rng.random())];
        let (mut r1, mut r2): (f64, f64) = (rng.random(), rng.random());
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        let o = a + (b - a) * r1 + (c - a) * r2;
        let yaw = rng.random_range(0.0..std::f64::consts::TAU);
        let r = align_z_to(&s.normal.normalize()) * Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).into_inner();
        Pose9::from_rotation(&r, s.position - r * o)
    }

    /// First valid proposal within `budget`, deterministic in `seed`.
    pub fn sample(&self, seed: u64, budget: usize) -> Result<PlacementOutcome, PlannerError> {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..budget {
            let pose = self.propose(&mut rng);
            let outcome = validate_placement(self.scene, self.object, &pose, &self.validation)?;
            if outcome.valid() {
                return Ok(PlacementOutcome { wall_time: start.elapsed().as_secs_f64(), ..outcome });
            }
        }
        Err(PlannerError::Exhausted { budget })
    }
}

/// Featurizes the scene with `seed` and runs the expert.
pub fn sample_expert_placement(
    scene: &SceneSpec,
    object: &ConvexBody,
    seed: u64,
    budget: usize,
) -> Result<PlacementOutcome, PlannerError> {
    let (cloud, _) = crate::cloud::featurize(scene, object, seed)?;
    ExpertPlanner::new(scene, object, &cloud).sample(seed, budget)
}
