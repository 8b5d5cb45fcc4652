//! Solvers for the symmetric indefinite mixed system.
//!
//! The default is a direct envelope `L D L^T` factorisation without pivoting.
//! Unknowns are eliminated element by element: each element's not yet
//! numbered stress unknowns, then its displacement unknowns. With that order
//! the remaining stress block stays positive definite and the remaining
//! displacement block negative semidefinite after every step, and every
//! displacement pivot is strictly negative because the divergence rows seen so
//! far have full rank. No pivoting is therefore needed.
//!
//! Above [`SolverOptions::direct_limit`] unknowns MINRES with a block-diagonal
//! preconditioner (`diag(M)` and the lumped Schur complement
//! `diag(B diag(M)^-1 B^T)`) is used instead.

use std::time::{Duration, Instant};

use crate::assembly::{norm, SaddleSystem};
use crate::error::{Error, Result};
use crate::interpolate::{DisplacementField, StressField};
use crate::sparse::CsrMatrix;

pub const DEFAULT_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Direct below `direct_limit` unknowns, MINRES above.
    Auto,
    Direct,
    Minres,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: f64,
    pub strategy: Strategy,
    pub direct_limit: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            strategy: Strategy::Auto,
            direct_limit: 200_000,
            max_iterations: 100_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveMethod {
    Direct { refinement_steps: usize },
    Minres { iterations: usize },
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub relative_residual: f64,
    pub method: SolveMethod,
    pub wall_time: Duration,
}

/// Solves `[M B^T; B 0] [sigma; u] = [0; F]` to relative residual `tol`.
pub fn solve(
    system: &SaddleSystem,
    load: &[f64],
    tol: f64,
) -> Result<(StressField, DisplacementField, SolveReport)> {
    solve_with(system, load, &SolverOptions::with_tol(tol))
}

pub fn solve_with(
    system: &SaddleSystem,
    load: &[f64],
    options: &SolverOptions,
) -> Result<(StressField, DisplacementField, SolveReport)> {
    let (mut x, report) = solve_vector(system, load, options)?;
    let ns = system.dofs().stress_len();
    let u = x.split_off(ns);
    Ok((
        StressField::new(system.dofs().clone(), x)?,
        DisplacementField::new(system.dofs().clone(), u)?,
        report,
    ))
}

/// As [`solve_with`] but returns the raw solution vector `[sigma; u]`.
pub fn solve_vector(system: &SaddleSystem, load: &[f64], options: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", options.tol)));
    }
    if load.len() != system.dofs().disp_len() {
        return Err(Error::LengthMismatch {
            expected: system.dofs().disp_len(),
            got: load.len(),
        });
    }
    let start = Instant::now();
    let rhs = system.rhs(load);
    if norm(load) == 0.0 {
        let report = SolveReport {
            relative_residual: 0.0,
            method: SolveMethod::Direct { refinement_steps: 0 },
            wall_time: start.elapsed(),
        };
        return Ok((vec![0.0; system.len()], report));
    }
    let use_direct = match options.strategy {
        Strategy::Direct => true,
        Strategy::Minres => false,
        Strategy::Auto => system.len() <= options.direct_limit,
    };
    let (x, method) = if use_direct {
        let full = system.full_matrix();
        let order = elimination_order(system);
        let ldlt = EnvelopeLdlt::factor(&full, order)?;
        let mut x = ldlt.solve(&rhs);
        let mut steps = 0;
        // a couple of refinement sweeps remove the factorisation round-off
        while steps < 3 && system.relative_residual(&x, load) > 0.1 * options.tol {
            let r = residual(&full, &x, &rhs);
            let dx = ldlt.solve(&r);
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += di;
            }
            steps += 1;
        }
        (x, SolveMethod::Direct { refinement_steps: steps })
    } else {
        let (x, iterations) = minres_saddle(system, &rhs, options)?;
        (x, SolveMethod::Minres { iterations })
    };
    let relative_residual = system.relative_residual(&x, load);
    if !relative_residual.is_finite() {
        return Err(Error::Breakdown("non-finite residual".into()));
    }
    if relative_residual > options.tol {
        let iterations = match method {
            SolveMethod::Direct { refinement_steps } => refinement_steps,
            SolveMethod::Minres { iterations } => iterations,
        };
        return Err(Error::NotConverged {
            residual: relative_residual,
            tol: options.tol,
            iterations,
        });
    }
    Ok((
        x,
        SolveReport {
            relative_residual,
            method,
            wall_time: start.elapsed(),
        },
    ))
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

/// Element-major elimination order for the full system (new position -> old index).
pub fn elimination_order(system: &SaddleSystem) -> Vec<usize> {
    let dofs = system.dofs();
    let ns = dofs.stress_len();
    let mut seen = vec![false; ns];
    let mut order = Vec::with_capacity(dofs.len());
    for elem in dofs.grid().elements() {
        for g in dofs.element_stress_dofs(&elem) {
            if !seen[g] {
                seen[g] = true;
                order.push(g);
            }
        }
        order.extend(dofs.element_disp_dofs(&elem).into_iter().map(|g| ns + g));
    }
    debug_assert_eq!(order.len(), dofs.len());
    order
}

/// Envelope (profile) `L D L^T` factorisation of a symmetric matrix under a
/// fixed symmetric permutation, without pivoting.
#[derive(Debug, Clone)]
pub struct EnvelopeLdlt {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl EnvelopeLdlt {
    /// `perm[new] = old`. Fails with [`Error::Singular`] on a numerically zero pivot.
    pub fn factor(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(Error::InvalidInput("factorisation needs a square matrix and a full permutation".into()));
        }
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        if inv.contains(&usize::MAX) {
            return Err(Error::InvalidInput("ordering is not a permutation".into()));
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (i, &old) in perm.iter().enumerate() {
            for (c, _) in a.row(old) {
                let j = inv[c];
                if j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i]));
        }
        let mut lower = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        for (i, &old) in perm.iter().enumerate() {
            for (c, v) in a.row(old) {
                let j = inv[c];
                if j < i {
                    lower[start[i] + j - first[i]] += v;
                } else if j == i {
                    diag[i] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = lower.split_at_mut(start[i]);
            let row = &mut rest[..i - fi];
            // row[k - fi] holds g_ik = l_ik d_k for k < j during the sweep
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let lj = &done[start[j]..start[j + 1]];
                let s: f64 = row[k0 - fi..j - fi]
                    .iter()
                    .zip(&lj[k0 - fj..j - fj])
                    .map(|(g, l)| g * l)
                    .sum();
                row[j - fi] -= s;
            }
            let mut d = diag[i];
            let mut scale = d.abs();
            for k in fi..i {
                let g = row[k - fi];
                let l = g / diag[k];
                d -= g * l;
                scale += (g * l).abs();
                row[k - fi] = l;
            }
            if !d.is_finite() || d.abs() <= 1e-14 * scale || d == 0.0 {
                return Err(Error::Singular { row: perm[i] });
            }
            diag[i] = d;
        }
        Ok(Self {
            perm,
            first,
            start,
            lower,
            diag,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Stored entries below the diagonal.
    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    /// `(positive, negative)` pivot counts.
    pub fn inertia(&self) -> (usize, usize) {
        let pos = self.diag.iter().filter(|&&d| d > 0.0).count();
        (pos, self.diag.len() - pos)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for (yi, d) in y.iter_mut().zip(&self.diag) {
            *yi /= d;
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (yk, l) in y[fi..i].iter_mut().zip(row) {
                *yk -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Inverse of the block-diagonal preconditioner `diag(M) (+) diag(B diag(M)^-1 B^T)`.
pub fn block_diagonal_preconditioner(system: &SaddleSystem) -> Vec<f64> {
    let mdiag = system.compliance().diagonal();
    let mut inv: Vec<f64> = mdiag.iter().map(|d| 1.0 / d).collect();
    let b = system.divergence();
    for r in 0..b.nrows() {
        let s: f64 = b.row(r).map(|(c, v)| v * v / mdiag[c]).sum();
        inv.push(if s > 0.0 { 1.0 / s } else { 1.0 });
    }
    inv
}

fn minres_saddle(system: &SaddleSystem, rhs: &[f64], options: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let precond = block_diagonal_preconditioner(system);
    let full = system.full_matrix();
    let bnorm = norm(rhs);
    let mut x = vec![0.0; rhs.len()];
    let mut total = 0;
    for _restart in 0..20 {
        let r = residual(&full, &x, rhs);
        if norm(&r) <= options.tol * bnorm {
            return Ok((x, total));
        }
        let budget = options.max_iterations.saturating_sub(total);
        if budget == 0 {
            break;
        }
        let (dx, its) = minres(|v| full.mul_vec(v), &precond, &r, options.tol * bnorm, budget)?;
        total += its;
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    let res = norm(&residual(&full, &x, rhs)) / bnorm;
    if res <= options.tol {
        Ok((x, total))
    } else {
        Err(Error::NotConverged {
            residual: res,
            tol: options.tol,
            iterations: total,
        })
    }
}

/// Preconditioned MINRES for symmetric `A` and SPD diagonal preconditioner
/// `diag(precond_inv)^-1`, from a zero initial guess. Stops when the true
/// residual falls below `abs_tol` (checked when the recurrence estimate says
/// so and periodically) or after `max_iterations`.
pub fn minres<A>(apply: A, precond_inv: &[f64], b: &[f64], abs_tol: f64, max_iterations: usize) -> Result<(Vec<f64>, usize)>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let precondition = |r: &[f64]| -> Vec<f64> { r.iter().zip(precond_inv).map(|(a, p)| a * p).collect() };

    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = precondition(&r1);
    let beta1_sq = dot(&r1, &y);
    if beta1_sq < 0.0 {
        return Err(Error::Breakdown("preconditioner is not positive definite".into()));
    }
    let beta1 = beta1_sq.sqrt();
    if beta1 == 0.0 {
        return Ok((x, 0));
    }
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let true_residual = |x: &[f64]| -> f64 {
        let ax = apply(x);
        ax.iter().zip(b).map(|(a, bi)| (bi - a) * (bi - a)).sum::<f64>().sqrt()
    };
    // the estimate is in the preconditioned norm; rescale to compare against abs_tol
    let est_scale = norm(b) / beta1;

    for itn in 1..=max_iterations {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = apply(&v);
        if itn >= 2 {
            let f = beta / oldb;
            for (yi, r) in y.iter_mut().zip(&r1) {
                *yi -= f * r;
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for (yi, r) in y.iter_mut().zip(&r2) {
            *yi -= f * r;
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        y = precondition(&r2);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 {
            return Err(Error::Breakdown("preconditioner is not positive definite".into()));
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = v
            .iter()
            .zip(&w1)
            .zip(&w2)
            .map(|((vi, a), b)| (vi - oldeps * a - delta * b) * denom)
            .collect();
        for (xi, wi) in x.iter_mut().zip(&w) {
            *xi += phi * wi;
        }

        let estimate = phibar * est_scale;
        if estimate <= abs_tol || itn % 50 == 0 || beta == 0.0 {
            if true_residual(&x) <= abs_tol {
                return Ok((x, itn));
            }
            if beta == 0.0 || estimate <= 1e-3 * abs_tol {
                // recurrence has converged but the true residual has not; restart
                return Ok((x, itn));
            }
        }
    }
    Ok((x, max_iterations))
}
