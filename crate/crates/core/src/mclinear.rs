//! Exact reach-avoid on finite chains and the equivalence checks between
//! contraction, uniqueness, triviality and simplicity.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::absorbing::las_finite;
use crate::engine::{bellman_residual, iterate, ValueFn};
use crate::error::{Error, Result};
use crate::horizon::{compute_m_rho, plan_horizon, ETA};
use crate::kernel::MatrixKernel;
use crate::space::Region;

/// Systems up to this many unknowns are solved by LU factorization.
pub const DIRECT_LIMIT: usize = 2000;
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Reciprocal condition number below which `I - P_A` counts as singular.
pub const RCOND_TOL: f64 = 1e-12;
/// Error bound reported for exact solves, covering rounding in the factorization.
pub const SOLVE_ERROR: f64 = 1e-10;

/// Dense `P` restricted to `idx x idx`.
fn restricted(kernel: &MatrixKernel, idx: &[usize]) -> DMatrix<f64> {
    let mut pos = vec![usize::MAX; kernel.len()];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let mut m = DMatrix::zeros(idx.len(), idx.len());
    for (r, &i) in idx.iter().enumerate() {
        for (j, p) in kernel.row(i) {
            if pos[j] != usize::MAX {
                m[(r, pos[j])] = p;
            }
        }
    }
    m
}

/// Solves `(I - P~) w = rhs` on `idx`, with `P~` certified contractive on `idx`.
fn solve_restricted(kernel: &MatrixKernel, idx: &[usize], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = idx.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n <= DIRECT_LIMIT {
        let q = restricted(kernel, idx);
        let system = DMatrix::identity(n, n) - &q;
        let b = nalgebra::DVector::from_column_slice(rhs);
        let lu = system.clone().lu();
        let mut x = lu.solve(&b).ok_or(Error::SingularSystem { residual: f64::INFINITY })?;
        // one round of iterative refinement
        let r = &b - &system * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
        let residual = (&b - &system * &x).amax();
        if !residual.is_finite() || residual > RESIDUAL_TOL {
            return Err(Error::SingularSystem { residual });
        }
        return Ok(x.iter().copied().collect());
    }
    // Richardson iteration w <- rhs + P~ w, stopped by the contraction tail bound
    let mut keep = vec![false; kernel.len()];
    for &i in idx {
        keep[i] = true;
    }
    let region = Region::from_mask(kernel.space(), keep.clone())?;
    let cert = compute_m_rho(kernel, &region, n + 1)?;
    if !cert.is_certified() {
        return Err(Error::SingularSystem { residual: f64::INFINITY });
    }
    let mut base = vec![0.0; kernel.len()];
    for (&i, &v) in idx.iter().zip(rhs) {
        base[i] = v;
    }
    let steps = plan_horizon(cert.m, cert.rho, 1e-12)?;
    let full = iterate(kernel, &keep, &base, base.clone(), steps, |_, _| true);
    Ok(idx.iter().map(|&i| full[i]).collect())
}

fn reach_avoid_with_las_value(kernel: &MatrixKernel, a: &Region, b: &Region, c: f64) -> Result<ValueFn> {
    let avoid = a.difference(b)?;
    let las = las_finite(kernel, &avoid).las;
    let unknown = avoid.difference(&las)?;
    let idx: Vec<usize> = unknown.indices().collect();
    let rhs: Vec<f64> = idx
        .iter()
        .map(|&i| kernel.transition_prob(i, b) + c * kernel.transition_prob(i, &las))
        .collect();
    let sol = solve_restricted(kernel, &idx, &rhs)?;
    let mut w: Vec<f64> = (0..kernel.len())
        .map(|i| if b.contains(i) { 1.0 } else if las.contains(i) { c } else { 0.0 })
        .collect();
    for (&i, v) in idx.iter().zip(sol) {
        w[i] = v;
    }
    ValueFn::new(kernel.space().clone(), w)
}

/// Exact `w(.; A, B)`: 1 on `B`, 0 on the largest absorbing subset of `A \ B` and
/// outside `A ∪ B`, and the solution of `(I - P~) w = P(., B)` on the rest.
pub fn solve_reach_avoid_exact(kernel: &MatrixKernel, a: &Region, b: &Region) -> Result<ValueFn> {
    reach_avoid_with_las_value(kernel, a, b, 0.0)
}

/// Another non-negative solution of the Bellman equation, equal to `c` on the
/// largest absorbing subset. It differs from the exact value whenever that subset
/// is non-empty and `c > 0`, which shows the Bellman equation alone does not pin
/// down `w` on non-simple sets.
pub fn alternative_solution(kernel: &MatrixKernel, a: &Region, b: &Region, c: f64) -> Result<ValueFn> {
    let w = reach_avoid_with_las_value(kernel, a, b, c)?;
    debug_assert!(bellman_residual(kernel, a, b, &w)? < 1e-8);
    Ok(w)
}

/// Exact `u(.; A) = 1 - w(.; X, A^c)`.
pub fn solve_invariance_exact(kernel: &MatrixKernel, a: &Region) -> Result<ValueFn> {
    let w = solve_reach_avoid_exact(kernel, &Region::full(kernel.space()), &a.complement())?;
    Ok(w.map(|v| 1.0 - v))
}

fn row_sum_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Reciprocal condition number of `I - P_A` in the 1-norm, 0 if singular.
fn rcond_i_minus(kernel: &MatrixKernel, idx: &[usize]) -> f64 {
    let n = idx.len();
    if n == 0 {
        return 1.0;
    }
    let system = DMatrix::identity(n, n) - restricted(kernel, idx);
    let norm1 = system.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    match system.try_inverse() {
        Some(inv) => {
            let inv1 = inv.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
            let r = 1.0 / (norm1 * inv1);
            if r.is_finite() {
                r
            } else {
                0.0
            }
        }
        None => 0.0,
    }
}

/// Five characterizations of a simple set, each evaluated by a separate method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EquivalenceReport {
    /// `||u_m|| < 1` for some `m <= |A| + 1`, by value iteration.
    pub finite_m: bool,
    /// `||(P_A)^n||_inf < 1` for some `n <= |A| + 1`, by explicit matrix powers.
    pub contractive: bool,
    /// `I - P_A` is nonsingular.
    pub unique: bool,
    /// `u(.; A) = 0`, from the limit of repeated squaring of `P_A`.
    pub trivial: bool,
    /// The largest absorbing subset of `A` is empty.
    pub simple: bool,
}

impl EquivalenceReport {
    pub fn all_agree(&self) -> bool {
        let v = [self.finite_m, self.contractive, self.unique, self.trivial, self.simple];
        v.iter().all(|&b| b == v[0])
    }
}

pub fn simplicity_battery(kernel: &MatrixKernel, a: &Region) -> Result<EquivalenceReport> {
    let idx: Vec<usize> = a.indices().collect();
    let n = idx.len();
    let finite_m = compute_m_rho(kernel, a, n + 1)?.is_certified();
    let q = restricted(kernel, &idx);
    let contractive = n == 0 || {
        let mut power = q.clone();
        let mut found = false;
        for _ in 0..=n {
            if row_sum_norm(&power) < 1.0 - ETA {
                found = true;
                break;
            }
            power = &power * &q;
        }
        found
    };
    let unique = rcond_i_minus(kernel, &idx) > RCOND_TOL;
    let trivial = n == 0 || {
        let mut power = q;
        for _ in 0..64 {
            power = &power * &power;
        }
        row_sum_norm(&power) <= 1e-9
    };
    let simple = las_finite(kernel, a).las.is_empty();
    Ok(EquivalenceReport { finite_m, contractive, unique, trivial, simple })
}

/// `(I - P_A nonsingular, u(.; A) = 0)`, the second from an exact solve.
pub fn uniqueness_iff_trivial(kernel: &MatrixKernel, a: &Region) -> Result<(bool, bool)> {
    let idx: Vec<usize> = a.indices().collect();
    let unique = rcond_i_minus(kernel, &idx) > RCOND_TOL;
    let u = solve_invariance_exact(kernel, a)?;
    Ok((unique, u.max_norm() <= 1e-9))
}
