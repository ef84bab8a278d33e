//! Area-weighted uniform sampling of body surfaces.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::body::ConvexBody;

/// A point on a body surface with its outward normal, in the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub body_id: String,
}

/// Which faces of a body contribute to sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceFilter {
    All,
    /// Only faces whose world normal points up (the visible ground patch).
    Upward,
}

#[derive(Debug, Clone)]
struct Triangle {
    body: usize,
    a: Vector3<f64>,
    b: Vector3<f64>,
    c: Vector3<f64>,
    normal: Vector3<f64>,
}

/// Triangle soup over several bodies with a cumulative-area table.
#[derive(Debug, Clone)]
pub struct SurfaceSampler {
    ids: Vec<String>,
    triangles: Vec<Triangle>,
    cumulative: Vec<f64>,
}

impl SurfaceSampler {
    pub fn new<'a>(bodies: impl IntoIterator<Item = (&'a ConvexBody, FaceFilter)>) -> Self {
        let mut ids = Vec::new();
        let mut triangles = Vec::new();
        for (bi, (body, filter)) in bodies.into_iter().enumerate() {
            ids.push(body.id.clone());
            let hull = body.world_hull();
            for (f, face) in hull.faces.iter().enumerate() {
                let normal = hull.face_normals[f];
                if filter == FaceFilter::Upward && normal.z < 1.0 - 1e-9 {
                    continue;
                }
                let a = hull.vertices[face[0]];
                for w in face[1..].windows(2) {
                    triangles.push(Triangle {
                        body: bi,
                        a,
                        b: hull.vertices[w[0]],
                        c: hull.vertices[w[1]],
                        normal,
                    });
                }
            }
        }
        let mut cumulative = Vec::with_capacity(triangles.len());
        let mut acc = 0.0;
        for t in &triangles {
            acc += (t.b - t.a).cross(&(t.c - t.a)).norm() / 2.0;
            cumulative.push(acc);
        }
        Self { ids, triangles, cumulative }
    }

    pub fn total_area(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<SurfaceSample> {
        let total = self.total_area();
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                let idx = self.cumulative.partition_point(|&c| c <= u).min(self.triangles.len() - 1);
                let tri = &self.triangles[idx];
                let (mut r1, mut r2): (f64, f64) = (rng.random(), rng.random());
                if r1 + r2 > 1.0 {
                    r1 = 1.0 - r1;
                    r2 = 1.0 - r2;
                }
                let position = tri.a + (tri.b - tri.a) * r1 + (tri.c - tri.a) * r2;
                SurfaceSample {
                    position,
                    normal: tri.normal,
                    body_id: self.ids[tri.body].clone(),
                }
            })
            .collect()
    }
}

/// `n` area-uniform samples on `body`, deterministic in `seed`.
pub fn sample_surface(body: &ConvexBody, n: usize, seed: u64) -> Vec<SurfaceSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SurfaceSampler::new([(body, FaceFilter::All)]).sample(n, &mut rng)
}
