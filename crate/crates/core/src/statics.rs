//! Frictional static equilibrium and robustness of rigid assemblies.
//!
//! Contact forces are expressed as nonnegative combinations of friction
//! pyramid generators. Equilibrium is a linear feasibility program with six
//! rows (force and torque about the centre of mass) per free body; the
//! robustness at a point is the largest magnitude of an external force that
//! keeps the program feasible.

use std::collections::HashMap;

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;

use crate::geom::{classify_proximity_with, ContactClass, ConvexBody, SurfaceSample, EPS_CONTACT};
use crate::lp::{FeasibleBasis, LpError, LpOutcome};

pub const STANDARD_GRAVITY: f64 = 9.81;
/// Scale of the robustness feature: `r / (r + R0)`.
pub const R0: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StaticsError {
    #[error("bodies {a} and {b} penetrate by {depth:.3e} m")]
    PenetratingScene { a: String, b: String, depth: f64 },
    #[error("point {0:?} is not on the surface of the given body")]
    PointOffSurface([f64; 3]),
    #[error("unknown body {0}")]
    UnknownBody(String),
    #[error("assembly is not in equilibrium without external force")]
    NotInEquilibrium,
    #[error("linear program failed: {0}")]
    LpNumericalFailure(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticsConfig {
    /// Generators per friction pyramid.
    pub m_gen: usize,
    pub gravity: Vector3<f64>,
    pub contact_eps: f64,
}

impl Default for StaticsConfig {
    fn default() -> Self {
        Self {
            m_gen: 8,
            gravity: Vector3::new(0.0, 0.0, -STANDARD_GRAVITY),
            contact_eps: EPS_CONTACT,
        }
    }
}

/// A point contact between two bodies, given by index into the body list.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub point: Vector3<f64>,
    /// Unit normal from `body_a` into `body_b`.
    pub normal: Vector3<f64>,
    pub body_a: usize,
    pub body_b: usize,
    pub mu: f64,
    /// Tangent direction fixing the azimuth of the pyramid generators.
    pub tangent: Vector3<f64>,
}

/// Linearized Coulomb cone: unit generators on the cone boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionPyramid {
    pub generators: Vec<Vector3<f64>>,
}

impl FrictionPyramid {
    pub fn new(normal: &Vector3<f64>, tangent: &Vector3<f64>, mu: f64, m_gen: usize) -> Self {
        let n = normal.normalize();
        let t1 = tangent_frame(&n, tangent);
        let t2 = n.cross(&t1);
        let generators = (0..m_gen)
            .map(|k| {
                let theta = std::f64::consts::TAU * k as f64 / m_gen as f64;
                (n + (t1 * theta.cos() + t2 * theta.sin()) * mu).normalize()
            })
            .collect();
        Self { generators }
    }
}

fn tangent_frame(n: &Vector3<f64>, hint: &Vector3<f64>) -> Vector3<f64> {
    for cand in [*hint, Vector3::x(), Vector3::y(), Vector3::z()] {
        let t = cand - n * n.dot(&cand);
        if t.norm() > 1e-6 {
            return t.normalize();
        }
    }
    unreachable!("some axis is never parallel to a unit normal")
}

/// External force `force` applied at `point` on body `body`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalForce {
    pub body: usize,
    pub point: Vector3<f64>,
    pub force: Vector3<f64>,
}

/// Contacts between every pair of bodies that touch within `contact_eps`.
/// Pairs of fixed bodies are skipped.
pub fn detect_contacts(bodies: &[ConvexBody], contact_eps: f64) -> Result<Vec<Contact>, StaticsError> {
    let aabbs: Vec<_> = bodies.iter().map(|b| b.world_aabb()).collect();
    let mut contacts = Vec::new();
    for i in 0..bodies.len() {
        for j in i + 1..bodies.len() {
            let (a, b) = (&bodies[i], &bodies[j]);
            if a.fixed && b.fixed {
                continue;
            }
            let ((alo, ahi), (blo, bhi)) = (&aabbs[i], &aabbs[j]);
            let apart = (0..3).any(|k| alo[k] > bhi[k] + contact_eps || blo[k] > ahi[k] + contact_eps);
            if apart {
                continue;
            }
            match classify_proximity_with(a, b, contact_eps) {
                ContactClass::Separated { .. } => {}
                ContactClass::Penetrating { depth } => {
                    return Err(StaticsError::PenetratingScene { a: a.id.clone(), b: b.id.clone(), depth });
                }
                ContactClass::Contact { patch, normal } => {
                    let reference = if a.fixed { b } else { a };
                    let tangent = reference.rotation().column(0).into_owned();
                    for point in patch {
                        contacts.push(Contact {
                            point,
                            normal,
                            body_a: i,
                            body_b: j,
                            mu: a.mu.min(b.mu),
                            tangent,
                        });
                    }
                }
            }
        }
    }
    Ok(contacts)
}

/// Equality-form equilibrium system: `A λ = b` with one column per
/// generator.
struct EquilibriumSystem {
    a: DMatrix<f64>,
    b: Vec<f64>,
    /// First constraint row of each body, `None` for fixed bodies.
    row_of: Vec<Option<usize>>,
    coms: Vec<Vector3<f64>>,
}

impl EquilibriumSystem {
    fn new(bodies: &[ConvexBody], contacts: &[Contact], config: &StaticsConfig) -> Self {
        let mut row_of = Vec::with_capacity(bodies.len());
        let mut rows = 0;
        for body in bodies {
            if body.fixed {
                row_of.push(None);
            } else {
                row_of.push(Some(rows));
                rows += 6;
            }
        }
        let coms: Vec<_> = bodies.iter().map(|b| b.world_com()).collect();
        let cols = contacts.len() * config.m_gen;
        let mut a = DMatrix::zeros(rows, cols);
        let mut col = 0;
        for c in contacts {
            let pyramid = FrictionPyramid::new(&c.normal, &c.tangent, c.mu, config.m_gen);
            for g in &pyramid.generators {
                for (body, sign) in [(c.body_b, 1.0), (c.body_a, -1.0)] {
                    if let Some(r) = row_of[body] {
                        let f = g * sign;
                        let tau = (c.point - coms[body]).cross(&f);
                        for k in 0..3 {
                            a[(r + k, col)] += f[k];
                            a[(r + 3 + k, col)] += tau[k];
                        }
                    }
                }
                col += 1;
            }
        }
        let mut b = vec![0.0; rows];
        for (i, body) in bodies.iter().enumerate() {
            if let Some(r) = row_of[i] {
                for k in 0..3 {
                    b[r + k] = -body.mass * config.gravity[k];
                }
            }
        }
        Self { a, b, row_of, coms }
    }

    /// Column of an external force on `body`; `None` when the body is fixed.
    fn wrench_column(&self, body: usize, point: &Vector3<f64>, force: &Vector3<f64>) -> Option<Vec<f64>> {
        let r = self.row_of[body]?;
        let mut col = vec![0.0; self.b.len()];
        let tau = (point - self.coms[body]).cross(force);
        for k in 0..3 {
            col[r + k] = force[k];
            col[r + 3 + k] = tau[k];
        }
        Some(col)
    }
}

/// Whether contact forces within the friction pyramids can balance gravity
/// (and the optional external force) on every free body.
pub fn equilibrium_feasible(
    bodies: &[ConvexBody],
    contacts: &[Contact],
    external: Option<&ExternalForce>,
    config: &StaticsConfig,
) -> Result<bool, StaticsError> {
    let mut sys = EquilibriumSystem::new(bodies, contacts, config);
    if let Some(ext) = external {
        if let Some(col) = sys.wrench_column(ext.body, &ext.point, &ext.force) {
            for (bi, ci) in sys.b.iter_mut().zip(col) {
                *bi -= ci;
            }
        }
    }
    Ok(FeasibleBasis::find(&sys.a, &sys.b)?.is_some())
}

/// Robustness solver for one assembly: the equilibrium basis is found once
/// and every query only appends the external-force column.
pub struct RobustnessSolver {
    system: EquilibriumSystem,
    basis: FeasibleBasis,
    index: HashMap<String, usize>,
    surfaces: Vec<ConvexBody>,
    contact_eps: f64,
}

impl RobustnessSolver {
    pub fn new(bodies: &[ConvexBody], contacts: &[Contact], config: &StaticsConfig) -> Result<Self, StaticsError> {
        let system = EquilibriumSystem::new(bodies, contacts, config);
        let basis = FeasibleBasis::find(&system.a, &system.b)?.ok_or(StaticsError::NotInEquilibrium)?;
        let index = bodies.iter().enumerate().map(|(i, b)| (b.id.clone(), i)).collect();
        Ok(Self {
            system,
            basis,
            index,
            surfaces: bodies.to_vec(),
            contact_eps: config.contact_eps,
        })
    }

    pub fn body_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Largest `f` with the force `f e` at `p` on `body` still balanced.
    pub fn robustness_on(&self, body: usize, p: &Vector3<f64>, e: &Vector3<f64>) -> Result<f64, StaticsError> {
        let b = self.surfaces.get(body).ok_or_else(|| StaticsError::UnknownBody(body.to_string()))?;
        if b.plane_excess(p).abs() > self.contact_eps.max(1e-9) {
            return Err(StaticsError::PointOffSurface([p.x, p.y, p.z]));
        }
        let Some(col) = self.system.wrench_column(body, p, e) else {
            return Ok(f64::INFINITY);
        };
        match self.basis.maximize_extra_column(&col)? {
            LpOutcome::Unbounded => Ok(f64::INFINITY),
            LpOutcome::Optimal { value, .. } => Ok(value.max(0.0)),
            LpOutcome::Infeasible => Err(StaticsError::NotInEquilibrium),
        }
    }

    /// Robustness at `p`, applied to the first free body whose surface
    /// contains `p` (or a fixed one, giving `+∞`).
    pub fn robustness(&self, p: &Vector3<f64>, e: &Vector3<f64>) -> Result<f64, StaticsError> {
        let tol = self.contact_eps.max(1e-9);
        let on = |b: &ConvexBody| b.plane_excess(p).abs() <= tol;
        let touched = (0..self.surfaces.len())
            .find(|&i| !self.surfaces[i].fixed && on(&self.surfaces[i]))
            .or_else(|| (0..self.surfaces.len()).find(|&i| on(&self.surfaces[i])))
            .ok_or(StaticsError::PointOffSurface([p.x, p.y, p.z]))?;
        self.robustness_on(touched, p, e)
    }
}

/// Maximum force magnitude along `e` at surface point `p` before any body
/// must move; `+∞` when no bound exists.
pub fn robustness(
    bodies: &[ConvexBody],
    contacts: &[Contact],
    p: &Vector3<f64>,
    e: &Vector3<f64>,
    config: &StaticsConfig,
) -> Result<f64, StaticsError> {
    RobustnessSolver::new(bodies, contacts, config)?.robustness(p, e)
}

/// One entry of a robustness field. Points whose evaluation failed are
/// reported as `+∞` with `failed` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub value: f64,
    pub failed: bool,
}

/// Robustness at every sample with the inward normal as direction,
/// evaluated in parallel with input order preserved.
pub fn robustness_field(
    bodies: &[ConvexBody],
    samples: &[SurfaceSample],
    config: &StaticsConfig,
) -> Result<Vec<FieldValue>, StaticsError> {
    let contacts = detect_contacts(bodies, config.contact_eps)?;
    let solver = RobustnessSolver::new(bodies, &contacts, config)?;
    Ok(samples
        .par_iter()
        .map(|s| {
            let result = solver
                .body_index(&s.body_id)
                .ok_or_else(|| StaticsError::UnknownBody(s.body_id.clone()))
                .and_then(|i| solver.robustness_on(i, &s.position, &-s.normal));
            match result {
                Ok(value) => FieldValue { value, failed: false },
                Err(err) => {
                    log::warn!("robustness failed at {:?}: {err}", s.position);
                    FieldValue { value: f64::INFINITY, failed: true }
                }
            }
        })
        .collect())
}

/// Bounded robustness feature in `[0, 1]`.
pub fn normalize_robustness(r: f64) -> f64 {
    if r.is_infinite() {
        1.0
    } else {
        r / (r + R0)
    }
}
