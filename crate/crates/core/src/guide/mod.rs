//! Stability loss over scene and object clouds, its pose gradient, and the
//! guided reverse sampler.

mod sampler;

pub use sampler::{
    sample_placements, sample_with_clouds, ChainResult, SampleBatch, SamplerConfig,
};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::{ObjectPoint, ScenePoint};
use crate::geom::{gram_schmidt_vjp, GeomError, Pose9};

/// Pairs closer than this get no distance gradient.
const COINCIDENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceConfig {
    /// Weight of the loss gradient subtracted from the x0-prediction.
    pub gamma: f64,
    /// Guidance is applied on inference steps whose index is a multiple of
    /// this.
    pub interval: usize,
    /// Length scale of the distance falloff (m).
    pub d_max: f64,
    /// Reverse steps per chain.
    pub steps: usize,
    /// Chains per call.
    pub batch: usize,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self { gamma: 0.1, interval: 2, d_max: 0.05, steps: 50, batch: 10 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GuideError {
    #[error("invalid guidance config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Statics(#[from] crate::statics::StaticsError),
}

impl GuidanceConfig {
    pub fn validate(&self, t_train: usize) -> Result<(), GuideError> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(GuideError::InvalidConfig(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if self.interval == 0 {
            return Err(GuideError::InvalidConfig("interval must be at least 1".into()));
        }
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return Err(GuideError::InvalidConfig(format!("d_max must be positive, got {}", self.d_max)));
        }
        if self.steps == 0 || self.steps > t_train {
            return Err(GuideError::InvalidConfig(format!("steps must be in 1..={t_train}, got {}", self.steps)));
        }
        Ok(())
    }
}

/// Per-pair terms shared by the loss and its gradient.
fn accumulate(
    pose: &Pose9,
    scene: &[ScenePoint],
    object: &[ObjectPoint],
    d_max: f64,
    mut visit: impl FnMut(&ScenePoint, &ObjectPoint, &Vector3<f64>, &Vector3<f64>, f64),
) -> Result<(), GeomError> {
    let r = pose.rotation()?;
    let world: Vec<(Vector3<f64>, Vector3<f64>)> =
        object.iter().map(|o| (r * o.position + pose.translation, r * o.normal)).collect();
    for s in scene {
        if s.feature == 0.0 {
            continue;
        }
        for (o, (q, m)) in object.iter().zip(&world) {
            let d = (s.position - q).norm();
            visit(s, o, q, m, (-d / d_max).exp());
        }
    }
    Ok(())
}

/// `J = -(1/|S|) sum_S sum_O |n_S . R n_O| exp(-|p_S - q_O| / d_max) R_hat(S)`.
pub fn stability_loss(pose: &Pose9, scene: &[ScenePoint], object: &[ObjectPoint], d_max: f64) -> Result<f64, GeomError> {
    if scene.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    accumulate(pose, scene, object, d_max, |s, _, _, m, e| {
        sum += s.normal.dot(m).abs() * e * s.feature;
    })?;
    Ok(-sum / scene.len() as f64)
}

/// Gradient of [`stability_loss`] with respect to the 9 pose components,
/// pulled back through the Gram-Schmidt projection.
pub fn stability_grad(
    pose: &Pose9,
    scene: &[ScenePoint],
    object: &[ObjectPoint],
    d_max: f64,
) -> Result<[f64; 9], GeomError> {
    if scene.is_empty() {
        return Ok([0.0; 9]);
    }
    let mut g_t = Vector3::zeros();
    let mut g_r = Matrix3::zeros();
    accumulate(pose, scene, object, d_max, |s, o, q, m, e| {
        let dot = s.normal.dot(m);
        let w = e * s.feature;
        // alignment factor through R n_O
        if dot != 0.0 {
            g_r += (s.normal * o.normal.transpose()) * (dot.signum() * w);
        }
        let diff = s.position - q;
        let d = diff.norm();
        if d > COINCIDENT {
            // d/dq exp(-|s - q| / d_max) = exp(..) (s - q) / (d d_max)
            let gq = diff * (dot.abs() * w / (d * d_max));
            g_t += gq;
            g_r += gq * o.position.transpose();
        }
    })?;
    let scale = -1.0 / scene.len() as f64;
    let g6 = gram_schmidt_vjp(&pose.rot6, &(g_r * scale))?;
    let g_t = g_t * scale;
    Ok([g_t.x, g_t.y, g_t.z, g6[0], g6[1], g6[2], g6[3], g6[4], g6[5]])
}
