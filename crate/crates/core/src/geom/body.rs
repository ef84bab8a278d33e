use nalgebra::{Matrix3, Vector3};

use super::{GeomError, Pose9};

/// Identifier of the fixed ground body.
pub const GROUND_ID: &str = "ground";

/// A convex rigid body with homogeneous or explicit mass distribution.
///
/// Geometry is stored in the body frame; `pose` places it in the world.
/// Fixed bodies (the ground) take part in contact detection but carry no
/// equilibrium unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    pub id: String,
    pub vertices: Vec<Vector3<f64>>,
    /// Vertex index loops, counter-clockwise seen from outside.
    pub faces: Vec<Vec<usize>>,
    pub mass: f64,
    pub com: Vector3<f64>,
    pub mu: f64,
    pub pose: Pose9,
    pub fixed: bool,
    /// Full side lengths when the body is a cuboid centred on its frame.
    pub extents: Option<Vector3<f64>>,
}

/// World-frame snapshot of a body's geometry.
#[derive(Debug, Clone)]
pub struct WorldHull {
    pub vertices: Vec<Vector3<f64>>,
    pub face_normals: Vec<Vector3<f64>>,
    pub faces: Vec<Vec<usize>>,
    /// Unique edge directions (unit).
    pub edge_dirs: Vec<Vector3<f64>>,
    pub edges: Vec<(usize, usize)>,
}

/// Axis-aligned box with side lengths `extents`, centred on the body origin.
pub fn make_cuboid(extents: Vector3<f64>, mass: f64, mu: f64) -> Result<ConvexBody, GeomError> {
    if !(extents.iter().all(|e| e.is_finite() && *e > 0.0)) {
        return Err(GeomError::InvalidDimensions(format!("extents {extents:?} must be positive")));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(GeomError::InvalidDimensions(format!("mass {mass} must be positive")));
    }
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(GeomError::InvalidDimensions(format!("friction {mu} must be non-negative")));
    }
    let h = extents / 2.0;
    let vertices: Vec<Vector3<f64>> = (0..8)
        .map(|i| {
            Vector3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let faces = vec![
        vec![0, 4, 6, 2], // -x
        vec![1, 3, 7, 5], // +x
        vec![0, 1, 5, 4], // -y
        vec![2, 6, 7, 3], // +y
        vec![0, 2, 3, 1], // -z
        vec![4, 5, 7, 6], // +z
    ];
    Ok(ConvexBody {
        id: String::new(),
        vertices,
        faces,
        mass,
        com: Vector3::zeros(),
        mu,
        pose: Pose9::identity(),
        fixed: false,
        extents: Some(extents),
    })
}

impl ConvexBody {
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_pose(mut self, pose: Pose9) -> Self {
        self.pose = pose;
        self
    }

    pub fn fixed(mut self) -> Self {
        self.fixed = true;
        self
    }

    pub fn is_ground(&self) -> bool {
        self.fixed
    }

    /// Outward unit normal of face `f` in the body frame.
    pub fn face_normal_local(&self, f: usize) -> Vector3<f64> {
        polygon_normal(self.faces[f].iter().map(|&i| self.vertices[i]))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        polygon_area_vector(self.faces[f].iter().map(|&i| self.vertices[i])).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Volume by the divergence theorem over the triangulated faces.
    pub fn volume(&self) -> f64 {
        let mut v = 0.0;
        for face in &self.faces {
            let p0 = self.vertices[face[0]];
            for w in face[1..].windows(2) {
                v += p0.dot(&self.vertices[w[0]].cross(&self.vertices[w[1]]));
            }
        }
        v / 6.0
    }

    /// Checks the stated body invariants (convexity, mass, friction, com).
    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(GeomError::InvalidDimensions(format!("{}: mass must be positive", self.id)));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(GeomError::InvalidDimensions(format!("{}: mu must be >= 0", self.id)));
        }
        for f in 0..self.faces.len() {
            let n = self.face_normal_local(f);
            let p = self.vertices[self.faces[f][0]];
            let offset = n.dot(&p);
            let planar = self.faces[f]
                .iter()
                .all(|&i| (n.dot(&self.vertices[i]) - offset).abs() <= 1e-9);
            if !planar || self.vertices.iter().any(|v| n.dot(v) - offset > 1e-9) {
                return Err(GeomError::NotConvex(self.id.clone()));
            }
            if n.dot(&self.com) - offset > 1e-9 {
                return Err(GeomError::InvalidDimensions(format!("{}: com outside hull", self.id)));
            }
        }
        Ok(())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        // body poses are always stored orthonormal
        self.pose.rotation().unwrap_or_else(|_| Matrix3::identity())
    }

    pub fn world_com(&self) -> Vector3<f64> {
        self.rotation() * self.com + self.pose.translation
    }

    pub fn world_hull(&self) -> WorldHull {
        let r = self.rotation();
        let t = self.pose.translation;
        let vertices: Vec<Vector3<f64>> = self.vertices.iter().map(|v| r * v + t).collect();
        let face_normals: Vec<Vector3<f64>> =
            (0..self.faces.len()).map(|f| r * self.face_normal_local(f)).collect();
        let mut edges = Vec::new();
        for face in &self.faces {
            for k in 0..face.len() {
                let (a, b) = (face[k], face[(k + 1) % face.len()]);
                let e = if a < b { (a, b) } else { (b, a) };
                if !edges.contains(&e) {
                    edges.push(e);
                }
            }
        }
        let mut edge_dirs: Vec<Vector3<f64>> = Vec::new();
        for &(a, b) in &edges {
            let d = (vertices[b] - vertices[a]).normalize();
            if !edge_dirs.iter().any(|e| e.cross(&d).norm() < 1e-9) {
                edge_dirs.push(d);
            }
        }
        WorldHull { vertices, face_normals, faces: self.faces.clone(), edge_dirs, edges }
    }

    /// Signed distance-like containment measure: max over faces of the
    /// plane offset (negative strictly inside).
    pub fn plane_excess(&self, world_point: &Vector3<f64>) -> f64 {
        let r = self.rotation();
        let local = r.transpose() * (world_point - self.pose.translation);
        self.local_plane_excess(&local)
    }

    pub fn local_plane_excess(&self, local: &Vector3<f64>) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let n = self.face_normal_local(f);
                n.dot(&(local - self.vertices[self.faces[f][0]]))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Face whose plane contains `world_point` within `tol`, preferring
    /// faces the direction `e` pushes into (`e · n < 0`).
    pub fn face_containing(&self, world_point: &Vector3<f64>, tol: f64) -> Option<usize> {
        if self.plane_excess(world_point) > tol {
            return None;
        }
        let r = self.rotation();
        let local = r.transpose() * (world_point - self.pose.translation);
        (0..self.faces.len()).find(|&f| {
            let n = self.face_normal_local(f);
            (n.dot(&(local - self.vertices[self.faces[f][0]]))).abs() <= tol
        })
    }

    /// Outward world normals of every face whose plane contains the point.
    pub fn world_normals_at(&self, world_point: &Vector3<f64>, tol: f64) -> Vec<Vector3<f64>> {
        if self.plane_excess(world_point) > tol {
            return Vec::new();
        }
        let r = self.rotation();
        let local = r.transpose() * (world_point - self.pose.translation);
        (0..self.faces.len())
            .filter(|&f| {
                let n = self.face_normal_local(f);
                (n.dot(&(local - self.vertices[self.faces[f][0]]))).abs() <= tol
            })
            .map(|f| r * self.face_normal_local(f))
            .collect()
    }

    pub fn world_aabb(&self) -> (Vector3<f64>, Vector3<f64>) {
        let hull = self.world_hull();
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &hull.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }
}

/// Newell's method: area-weighted normal of a planar polygon (twice the area).
fn polygon_area_vector(points: impl Iterator<Item = Vector3<f64>>) -> Vector3<f64> {
    let pts: Vec<Vector3<f64>> = points.collect();
    let mut n = Vector3::zeros();
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        n += a.cross(&b);
    }
    n / 2.0
}

fn polygon_normal(points: impl Iterator<Item = Vector3<f64>>) -> Vector3<f64> {
    polygon_area_vector(points).normalize()
}
