//! Separating-axis proximity classification and contact patches.

use nalgebra::Vector3;

use super::body::{ConvexBody, WorldHull};
use super::EPS_CONTACT;

/// Relationship between two posed convex bodies.
#[derive(Debug, Clone, PartialEq)]
pub enum ContactClass {
    Separated { gap: f64 },
    /// `normal` points from the first body into the second.
    Contact { patch: Vec<Vector3<f64>>, normal: Vector3<f64> },
    Penetrating { depth: f64 },
}

impl ContactClass {
    pub fn is_penetrating(&self) -> bool {
        matches!(self, ContactClass::Penetrating { .. })
    }
}

/// Edge axes must beat the best face axis by this much to be used.
const EDGE_PREFERENCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
enum AxisSource {
    FaceA,
    FaceB,
    Edge(usize, usize),
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    /// Unit direction, oriented from A towards B.
    dir: Vector3<f64>,
    separation: f64,
    source: AxisSource,
}

fn project(vertices: &[Vector3<f64>], dir: &Vector3<f64>) -> (f64, f64) {
    vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let d = dir.dot(v);
        (lo.min(d), hi.max(d))
    })
}

/// Interval separation along `dir`, choosing the orientation that gives the
/// larger value.
fn axis_separation(a: &WorldHull, b: &WorldHull, dir: Vector3<f64>, source: AxisSource) -> Axis {
    let (a_lo, a_hi) = project(&a.vertices, &dir);
    let (b_lo, b_hi) = project(&b.vertices, &dir);
    let forward = b_lo - a_hi;
    let backward = a_lo - b_hi;
    if forward >= backward {
        Axis { dir, separation: forward, source }
    } else {
        Axis { dir: -dir, separation: backward, source }
    }
}

fn best_axis<'a>(axes: impl Iterator<Item = &'a Axis>) -> Option<Axis> {
    axes.fold(None, |best: Option<Axis>, ax| match best {
        Some(b) if b.separation >= ax.separation => Some(b),
        _ => Some(*ax),
    })
}

/// Classifies two bodies with the default contact tolerance.
pub fn classify_proximity(a: &ConvexBody, b: &ConvexBody) -> ContactClass {
    classify_proximity_with(a, b, EPS_CONTACT)
}

/// Separating-axis test over face normals and edge-cross axes. The signed
/// minimum-translation distance decides between separation, contact (within
/// `eps`) and penetration.
pub fn classify_proximity_with(a: &ConvexBody, b: &ConvexBody, eps: f64) -> ContactClass {
    let ha = a.world_hull();
    let hb = b.world_hull();
    classify_hulls(&ha, &hb, eps)
}

pub(crate) fn classify_hulls(ha: &WorldHull, hb: &WorldHull, eps: f64) -> ContactClass {
    let mut face_axes = Vec::with_capacity(ha.face_normals.len() + hb.face_normals.len());
    for n in &ha.face_normals {
        face_axes.push(axis_separation(ha, hb, *n, AxisSource::FaceA));
    }
    for n in &hb.face_normals {
        face_axes.push(axis_separation(ha, hb, *n, AxisSource::FaceB));
    }
    let best_face = best_axis(face_axes.iter()).expect("bodies have faces");

    let mut best = best_face;
    for (i, ea) in ha.edge_dirs.iter().enumerate() {
        for (j, eb) in hb.edge_dirs.iter().enumerate() {
            let c = ea.cross(eb);
            let len = c.norm();
            if len < 1e-6 {
                continue;
            }
            let ax = axis_separation(ha, hb, c / len, AxisSource::Edge(i, j));
            if ax.separation > best.separation + EDGE_PREFERENCE {
                best = ax;
            }
        }
    }

    let d = best.separation;
    if d > eps {
        return ContactClass::Separated { gap: d };
    }
    if d < -eps {
        return ContactClass::Penetrating { depth: -d };
    }
    let (patch, normal) = match best.source {
        AxisSource::Edge(i, j) => edge_contact(ha, hb, &best, i, j),
        AxisSource::FaceA | AxisSource::FaceB => face_contact(ha, hb, &best, eps),
    };
    ContactClass::Contact { patch, normal }
}

fn face_contact(
    ha: &WorldHull,
    hb: &WorldHull,
    axis: &Axis,
    eps: f64,
) -> (Vec<Vector3<f64>>, Vector3<f64>) {
    // reference face: the face best aligned with the axis on either body
    let (fa, align_a) = best_aligned_face(ha, &axis.dir);
    let (fb, align_b) = best_aligned_face(hb, &-axis.dir);
    let ref_on_a = align_a >= align_b;
    let (reference, ref_face, incident, inc_dir) = if ref_on_a {
        (ha, fa, hb, -ha.face_normals[fa])
    } else {
        (hb, fb, ha, -hb.face_normals[fb])
    };
    let ref_normal = reference.face_normals[ref_face];
    let (inc_face, _) = best_aligned_face(incident, &inc_dir);

    let ref_poly: Vec<Vector3<f64>> =
        reference.faces[ref_face].iter().map(|&i| reference.vertices[i]).collect();
    let mut poly: Vec<Vector3<f64>> =
        incident.faces[inc_face].iter().map(|&i| incident.vertices[i]).collect();

    for k in 0..ref_poly.len() {
        let p = ref_poly[k];
        let q = ref_poly[(k + 1) % ref_poly.len()];
        let side = (q - p).cross(&ref_normal);
        let len = side.norm();
        if len < 1e-12 {
            continue;
        }
        poly = clip_polygon(&poly, &(side / len), (side / len).dot(&p));
        if poly.is_empty() {
            break;
        }
    }

    let origin = ref_poly[0];
    let mut patch: Vec<Vector3<f64>> = Vec::new();
    for v in &poly {
        let s = ref_normal.dot(&(v - origin));
        if s <= eps {
            push_unique(&mut patch, v - ref_normal * s);
        }
    }
    if patch.is_empty() {
        // numerically empty clip: fall back to the deepest incident vertex
        let deepest = incident.faces[inc_face]
            .iter()
            .map(|&i| incident.vertices[i])
            .min_by(|x, y| {
                ref_normal.dot(&(x - origin)).total_cmp(&ref_normal.dot(&(y - origin)))
            })
            .expect("non-empty face");
        patch.push(deepest - ref_normal * ref_normal.dot(&(deepest - origin)));
    }
    let normal = if ref_on_a { ref_normal } else { -ref_normal };
    (patch, normal)
}

fn edge_contact(
    ha: &WorldHull,
    hb: &WorldHull,
    axis: &Axis,
    i: usize,
    j: usize,
) -> (Vec<Vector3<f64>>, Vector3<f64>) {
    let ea = ha.edge_dirs[i];
    let eb = hb.edge_dirs[j];
    let support = |h: &WorldHull, dir: &Vector3<f64>, e: &Vector3<f64>, sign: f64| {
        h.edges
            .iter()
            .filter(|(p, q)| (h.vertices[*q] - h.vertices[*p]).normalize().cross(e).norm() < 1e-9)
            .max_by(|(p1, q1), (p2, q2)| {
                let m1 = sign * dir.dot(&(h.vertices[*p1] + h.vertices[*q1]));
                let m2 = sign * dir.dot(&(h.vertices[*p2] + h.vertices[*q2]));
                m1.total_cmp(&m2)
            })
            .map(|&(p, q)| (h.vertices[p], h.vertices[q]))
            .expect("edge direction comes from an edge")
    };
    let (a0, a1) = support(ha, &axis.dir, &ea, 1.0);
    let (b0, b1) = support(hb, &axis.dir, &eb, -1.0);
    let (pa, pb) = closest_points_segments(a0, a1, b0, b1);
    (vec![(pa + pb) / 2.0], axis.dir)
}

fn best_aligned_face(h: &WorldHull, dir: &Vector3<f64>) -> (usize, f64) {
    h.face_normals
        .iter()
        .enumerate()
        .map(|(i, n)| (i, n.dot(dir)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

fn push_unique(patch: &mut Vec<Vector3<f64>>, p: Vector3<f64>) {
    if !patch.iter().any(|q| (q - p).norm() < 1e-9) {
        patch.push(p);
    }
}

/// Sutherland–Hodgman: keeps the part of `poly` with `n·x <= offset`.
fn clip_polygon(poly: &[Vector3<f64>], n: &Vector3<f64>, offset: f64) -> Vec<Vector3<f64>> {
    const TOL: f64 = 1e-12;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for k in 0..poly.len() {
        let cur = poly[k];
        let next = poly[(k + 1) % poly.len()];
        let dc = n.dot(&cur) - offset;
        let dn = n.dot(&next) - offset;
        if dc <= TOL {
            out.push(cur);
        }
        if (dc <= TOL) != (dn <= TOL) {
            let t = dc / (dc - dn);
            out.push(cur + (next - cur) * t);
        }
    }
    out
}

/// Closest points between segments `[p0,p1]` and `[q0,q1]`.
pub fn closest_points_segments(
    p0: Vector3<f64>,
    p1: Vector3<f64>,
    q0: Vector3<f64>,
    q1: Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-18 && e <= 1e-18 {
        return (p0, q0);
    }
    if a <= 1e-18 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-18 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-18 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p0 + d1 * s, q0 + d2 * t)
}
