//! Placement poses with a continuous 6D rotation representation.

use nalgebra::{Matrix3, Rotation3, Vector3};

use super::GeomError;

/// Below this norm (or cross-product norm) the 6D vector is unusable.
const DEGENERACY_EPS: f64 = 1e-9;

/// First two columns of a rotation matrix, before orthogonalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation6 {
    pub a1: Vector3<f64>,
    pub a2: Vector3<f64>,
}

impl Rotation6 {
    pub fn new(a1: Vector3<f64>, a2: Vector3<f64>) -> Self {
        Self { a1, a2 }
    }

    pub fn identity() -> Self {
        Self::from_matrix(&Matrix3::identity())
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self {
            a1: m.column(0).into_owned(),
            a2: m.column(1).into_owned(),
        }
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_matrix(Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).matrix())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.a1.x, self.a1.y, self.a1.z, self.a2.x, self.a2.y, self.a2.z]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            a1: Vector3::new(v[0], v[1], v[2]),
            a2: Vector3::new(v[3], v[4], v[5]),
        }
    }

    /// Projects onto SO(3): `c1 = a1/|a1|`, `c2` is `a2` with its `c1`
    /// component removed and normalized, `c3 = c1 × c2`.
    pub fn gram_schmidt(&self) -> Result<Matrix3<f64>, GeomError> {
        gram_schmidt_6d(self)
    }
}

/// Projects a 6D rotation representation onto a proper rotation matrix.
pub fn gram_schmidt_6d(r6: &Rotation6) -> Result<Matrix3<f64>, GeomError> {
    let (c1, c2, _) = gram_schmidt_parts(r6)?;
    let c3 = c1.cross(&c2);
    Ok(Matrix3::from_columns(&[c1, c2, c3]))
}

/// Intermediate quantities of the projection, reused by the pullback.
pub(crate) fn gram_schmidt_parts(
    r6: &Rotation6,
) -> Result<(Vector3<f64>, Vector3<f64>, Vector3<f64>), GeomError> {
    if !r6.a1.iter().chain(r6.a2.iter()).all(|v| v.is_finite()) {
        return Err(GeomError::DegenerateRotation);
    }
    let n1 = r6.a1.norm();
    if n1 <= DEGENERACY_EPS {
        return Err(GeomError::DegenerateRotation);
    }
    let c1 = r6.a1 / n1;
    // parallel check on the normalized pair
    if c1.cross(&r6.a2).norm() <= DEGENERACY_EPS * r6.a2.norm().max(1.0) {
        return Err(GeomError::DegenerateRotation);
    }
    let u = r6.a2 - c1 * c1.dot(&r6.a2);
    let nu = u.norm();
    if nu <= DEGENERACY_EPS {
        return Err(GeomError::DegenerateRotation);
    }
    Ok((c1, u / nu, u))
}

/// Vector-Jacobian product of [`gram_schmidt_6d`]: maps `dL/dR` (3×3) to
/// `dL/d(a1, a2)`.
pub fn gram_schmidt_vjp(r6: &Rotation6, grad_r: &Matrix3<f64>) -> Result<[f64; 6], GeomError> {
    let (c1, c2, u) = gram_schmidt_parts(r6)?;
    let g1 = grad_r.column(0).into_owned();
    let g2 = grad_r.column(1).into_owned();
    let g3 = grad_r.column(2).into_owned();

    // c3 = c1 × c2
    let mut dc1 = g1 + c2.cross(&g3);
    let dc2 = g2 + g3.cross(&c1);

    // c2 = u / |u|
    let nu = u.norm();
    let du = (dc2 - c2 * c2.dot(&dc2)) / nu;

    // u = a2 - (c1·a2) c1
    let c1_du = c1.dot(&du);
    let da2 = du - c1 * c1_du;
    dc1 -= r6.a2 * c1_du + du * c1.dot(&r6.a2);

    // c1 = a1 / |a1|
    let n1 = r6.a1.norm();
    let da1 = (dc1 - c1 * c1.dot(&dc1)) / n1;

    Ok([da1.x, da1.y, da1.z, da2.x, da2.y, da2.z])
}

/// Translation plus 6D rotation; the diffusion state variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose9 {
    pub translation: Vector3<f64>,
    pub rot6: Rotation6,
}

impl Pose9 {
    pub fn new(translation: Vector3<f64>, rot6: Rotation6) -> Self {
        Self { translation, rot6 }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), Rotation6::identity())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(t, Rotation6::identity())
    }

    pub fn from_rotation(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(translation, Rotation6::from_matrix(rotation))
    }

    pub fn to_array(&self) -> [f64; 9] {
        let r = self.rot6.to_array();
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
            r[0],
            r[1],
            r[2],
            r[3],
            r[4],
            r[5],
        ]
    }

    pub fn from_array(v: &[f64; 9]) -> Self {
        Self::from_slice(v)
    }

    pub fn from_slice(v: &[f64]) -> Self {
        assert!(v.len() >= 9, "pose needs 9 components");
        Self {
            translation: Vector3::new(v[0], v[1], v[2]),
            rot6: Rotation6::from_slice(&v[3..9]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn rotation(&self) -> Result<Matrix3<f64>, GeomError> {
        gram_schmidt_6d(&self.rot6)
    }

    /// Same pose with the rotation block replaced by its SO(3) projection.
    pub fn orthogonalized(&self) -> Result<Pose9, GeomError> {
        let r = self.rotation()?;
        Ok(Pose9::from_rotation(&r, self.translation))
    }

    /// Rigid transform of a single point.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Result<Vector3<f64>, GeomError> {
        Ok(self.rotation()? * p + self.translation)
    }

    /// `other` expressed after this pose: `self ∘ other`.
    pub fn compose(&self, other: &Pose9) -> Result<Pose9, GeomError> {
        let r = self.rotation()?;
        let ro = other.rotation()?;
        Ok(Pose9::from_rotation(
            &(r * ro),
            r * other.translation + self.translation,
        ))
    }
}

impl Default for Pose9 {
    fn default() -> Self {
        Self::identity()
    }
}

/// Rotated normals alongside transformed points.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    pub points: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

/// `p' = R p + t`, `n' = R n`.
pub fn apply_pose(
    pose: &Pose9,
    points: &[Vector3<f64>],
    normals: Option<&[Vector3<f64>]>,
) -> Result<Transformed, GeomError> {
    let r = pose.rotation()?;
    let points = points.iter().map(|p| r * p + pose.translation).collect();
    let normals = normals.map(|ns| ns.iter().map(|n| r * n).collect());
    Ok(Transformed { points, normals })
}
