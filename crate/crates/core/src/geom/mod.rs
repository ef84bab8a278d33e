//! Rigid-body geometry: poses, 6D rotations, convex bodies, proximity
//! classification, contact patches and surface sampling.

mod body;
mod pose;
mod proximity;
mod sampling;

pub use body::{make_cuboid, ConvexBody, WorldHull, GROUND_ID};
pub use pose::{apply_pose, gram_schmidt_6d, gram_schmidt_vjp, Pose9, Rotation6, Transformed};
pub use proximity::{classify_proximity, classify_proximity_with, closest_points_segments, ContactClass};
pub use sampling::{sample_surface, FaceFilter, SurfaceSample, SurfaceSampler};

/// Gaps and overlaps below this magnitude (m) count as contact.
pub const EPS_CONTACT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("6D rotation is degenerate (zero or parallel columns)")]
    DegenerateRotation,
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("body {0} is not convex")]
    NotConvex(String),
}
