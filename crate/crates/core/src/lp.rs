//! Dense two-phase tableau simplex for small equality-form programs
//! `A x = b, x >= 0`.
//!
//! Phase one drives artificial variables out with Dantzig pricing; when
//! pivots stall on degenerate vertices the solver switches to Bland's rule,
//! which cannot cycle. Artificials left basic at zero (redundant rows) stay
//! pinned to the bound `[0, 0]` during phase two, so a basis found once can be
//! reused for many objectives or extra columns.

use nalgebra::DMatrix;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("simplex exceeded {0} iterations")]
    IterationLimit(usize),
    #[error("non-finite value in linear program")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Result of an optimization.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Unbounded,
    Infeasible,
}

/// Row-major tableau with the right-hand side in the last column.
#[derive(Debug, Clone)]
struct Tableau {
    rows: usize,
    /// Structural columns (excludes artificials and rhs).
    n_struct: usize,
    /// Row stride: `n_struct + rows + 1`.
    stride: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.stride + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.stride + self.stride - 1]
    }

    fn n_cols(&self) -> usize {
        self.stride - 1
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.n_struct && col < self.n_struct + self.rows
    }

    fn pivot(&mut self, pr: usize, pc: usize, cost: &mut [f64]) {
        let stride = self.stride;
        let inv = 1.0 / self.at(pr, pc);
        let (before, rest) = self.data.split_at_mut(pr * stride);
        let (prow, after) = rest.split_at_mut(stride);
        for v in prow.iter_mut() {
            *v *= inv;
        }
        prow[pc] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        for row in before.chunks_mut(stride) {
            eliminate(row);
        }
        for row in after.chunks_mut(stride) {
            eliminate(row);
        }
        eliminate(cost);
        self.basis[pr] = pc;
    }

    /// Reduced costs (and objective in the last slot) for minimizing `c`.
    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.stride];
        d[..c.len()].copy_from_slice(c);
        for r in 0..self.rows {
            let cb = c.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                let row = &self.data[r * self.stride..(r + 1) * self.stride];
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    /// Minimizes `c·x` from the current (feasible) basis. `allow` marks
    /// columns permitted to enter. Basic artificials are bounded at zero
    /// when `pin_artificials` is set.
    fn optimize(
        &mut self,
        cost: &mut [f64],
        allow: impl Fn(usize) -> bool,
        pin_artificials: bool,
    ) -> Result<bool, LpError> {
        let limit = 50 * (self.rows + self.n_cols()) + 1000;
        let mut streak = 0usize;
        for _ in 0..limit {
            let bland = streak >= DEGENERATE_STREAK;
            let mut entering = None;
            let mut best = -COST_TOL;
            for j in 0..self.n_cols() {
                if !allow(j) {
                    continue;
                }
                let dj = cost[j];
                if !dj.is_finite() {
                    return Err(LpError::NonFinite);
                }
                if dj < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            let Some(e) = entering else {
                return Ok(true);
            };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, e);
                let ratio = if pin_artificials && self.is_artificial(self.basis[r]) {
                    if a.abs() > PIVOT_TOL {
                        0.0
                    } else {
                        continue;
                    }
                } else if a > PIVOT_TOL {
                    (self.rhs(r) / a).max(0.0)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-12 {
                            true
                        } else if ratio <= lratio + 1e-12 {
                            if bland {
                                self.basis[r] < self.basis[lr]
                            } else {
                                a.abs() > self.at(lr, e).abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            streak = if ratio <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(r, e, cost);
        }
        Err(LpError::IterationLimit(limit))
    }

    fn solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_struct];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] = self.rhs(r).max(0.0);
            }
        }
        x
    }
}

/// A feasible basis of `A x = b, x >= 0`, reusable for several objectives
/// and for programs extended by one extra column.
#[derive(Debug, Clone)]
pub struct FeasibleBasis {
    tableau: Tableau,
    row_sign: Vec<f64>,
}

impl FeasibleBasis {
    /// Phase one. Returns `Ok(None)` when the system has no nonnegative
    /// solution.
    pub fn find(a: &DMatrix<f64>, b: &[f64]) -> Result<Option<Self>, LpError> {
        let (rows, n_struct) = a.shape();
        if b.len() != rows {
            return Err(LpError::Dimension(format!("{} rows but rhs has {}", rows, b.len())));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite);
        }
        let stride = n_struct + rows + 1;
        let mut data = vec![0.0; rows * stride];
        let mut row_sign = vec![1.0; rows];
        for r in 0..rows {
            let s = if b[r] < 0.0 { -1.0 } else { 1.0 };
            row_sign[r] = s;
            let row = &mut data[r * stride..(r + 1) * stride];
            for c in 0..n_struct {
                row[c] = s * a[(r, c)];
            }
            row[n_struct + r] = 1.0;
            row[stride - 1] = s * b[r];
        }
        let mut tableau = Tableau {
            rows,
            n_struct,
            stride,
            data,
            basis: (n_struct..n_struct + rows).collect(),
        };

        let mut c = vec![0.0; n_struct + rows];
        for v in &mut c[n_struct..] {
            *v = 1.0;
        }
        let mut cost = tableau.reduced_costs(&c);
        tableau.optimize(&mut cost, |_| true, false)?;

        let scale = 1.0 + b.iter().map(|v| v.abs()).sum::<f64>();
        let infeasibility: f64 = (0..rows)
            .filter(|&r| tableau.is_artificial(tableau.basis[r]))
            .map(|r| tableau.rhs(r))
            .sum();
        if infeasibility > 1e-9 * scale {
            return Ok(None);
        }

        // drive remaining artificials out where a structural pivot exists
        let mut dummy = vec![0.0; stride];
        for r in 0..rows {
            if tableau.is_artificial(tableau.basis[r]) {
                let pick = (0..n_struct)
                    .filter(|&j| tableau.at(r, j).abs() > 1e-7)
                    .max_by(|&i, &j| tableau.at(r, i).abs().total_cmp(&tableau.at(r, j).abs()));
                if let Some(j) = pick {
                    tableau.pivot(r, j, &mut dummy);
                }
            }
        }
        // clean tiny negative rhs from round-off
        for r in 0..rows {
            let idx = r * stride + stride - 1;
            if tableau.data[idx] < 0.0 && tableau.data[idx] > -1e-9 * scale {
                tableau.data[idx] = 0.0;
            }
        }
        Ok(Some(Self { tableau, row_sign }))
    }

    pub fn rows(&self) -> usize {
        self.tableau.rows
    }

    pub fn n_struct(&self) -> usize {
        self.tableau.n_struct
    }

    /// Current basic solution.
    pub fn solution(&self) -> Vec<f64> {
        self.tableau.solution()
    }

    /// Maximizes `c·x` over the feasible set.
    pub fn maximize(&self, c: &[f64]) -> Result<LpOutcome, LpError> {
        if c.len() != self.tableau.n_struct {
            return Err(LpError::Dimension("objective length".into()));
        }
        let mut t = self.tableau.clone();
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let mut cost = t.reduced_costs(&neg);
        let n_struct = t.n_struct;
        if !t.optimize(&mut cost, |j| j < n_struct, true)? {
            return Ok(LpOutcome::Unbounded);
        }
        let x = t.solution();
        let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { value, x })
    }

    /// Appends one nonnegative variable with constraint column `column` and
    /// maximizes it. The optimal `x` has the new variable last.
    pub fn maximize_extra_column(&self, column: &[f64]) -> Result<LpOutcome, LpError> {
        let old = &self.tableau;
        let rows = old.rows;
        if column.len() != rows {
            return Err(LpError::Dimension("extra column length".into()));
        }
        if column.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite);
        }
        // layout: [structural | new | artificials | rhs]
        let n_struct = old.n_struct + 1;
        let stride = old.stride + 1;
        let mut data = vec![0.0; rows * stride];
        for r in 0..rows {
            let src = &old.data[r * old.stride..(r + 1) * old.stride];
            let dst = &mut data[r * stride..(r + 1) * stride];
            dst[..old.n_struct].copy_from_slice(&src[..old.n_struct]);
            // B^-1 is the artificial block of the tableau
            let binv = &src[old.n_struct..old.n_struct + rows];
            dst[old.n_struct] = binv
                .iter()
                .zip(column.iter().zip(&self.row_sign))
                .map(|(bi, (c, s))| bi * c * s)
                .sum();
            dst[old.n_struct + 1..].copy_from_slice(&src[old.n_struct..]);
        }
        let basis = old
            .basis
            .iter()
            .map(|&b| if b < old.n_struct { b } else { b + 1 })
            .collect();
        let mut t = Tableau { rows, n_struct, stride, data, basis };
        let mut c = vec![0.0; n_struct];
        c[n_struct - 1] = -1.0;
        let mut cost = t.reduced_costs(&c);
        if !t.optimize(&mut cost, |j| j < n_struct, true)? {
            return Ok(LpOutcome::Unbounded);
        }
        let x = t.solution();
        Ok(LpOutcome::Optimal { value: x[n_struct - 1], x })
    }
}

/// Maximizes `c·x` subject to `A x = b, x >= 0`.
pub fn maximize(a: &DMatrix<f64>, b: &[f64], c: &[f64]) -> Result<LpOutcome, LpError> {
    match FeasibleBasis::find(a, b)? {
        None => Ok(LpOutcome::Infeasible),
        Some(basis) => basis.maximize(c),
    }
}
