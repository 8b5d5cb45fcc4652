//! Error norms, superclose norms, rate fitting and stability probes.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::{assemble, assemble_displacement_mass, assemble_div_gram, assemble_l2_gram, DofMap};
use crate::element::{
    local_displacement_mass, local_div_gram, local_interpolant, local_l2_gram, LocalDisplacementBasis,
    LocalStressBasis, FIELD_QUAD_POINTS,
};
use crate::error::{Error, Result};
use crate::grid::{ElementBox, TensorGrid};
use crate::interpolate::{same_map, DisplacementField, StressField};
use crate::manufactured::ExactSolution;
use crate::material::LameParams;
use crate::quadrature::TensorRule;

/// Default cap on the number of unknowns for the dense stability probes.
pub const DEFAULT_PROBE_BUDGET: usize = 3000;

/// Plain errors against the exact solution and superclose distances to its interpolants.
///
/// `*_hdiv` is always `sqrt(l2^2 + div^2)` of the matching pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorRecord {
    pub h: f64,
    pub stress_dofs: usize,
    pub disp_dofs: usize,
    pub sigma_l2: f64,
    pub sigma_div: f64,
    pub sigma_hdiv: f64,
    pub u_l2: f64,
    pub super_sigma_l2: f64,
    pub super_sigma_div: f64,
    pub super_sigma_hdiv: f64,
    pub super_u_l2: f64,
}

impl ErrorRecord {
    fn for_map(dofs: &DofMap) -> Self {
        Self {
            h: dofs.grid().h(),
            stress_dofs: dofs.stress_len(),
            disp_dofs: dofs.disp_len(),
            ..Self::default()
        }
    }

    /// Takes the superclose part from `other`.
    pub fn with_superclose(mut self, other: &ErrorRecord) -> Self {
        self.super_sigma_l2 = other.super_sigma_l2;
        self.super_sigma_div = other.super_sigma_div;
        self.super_sigma_hdiv = other.super_sigma_hdiv;
        self.super_u_l2 = other.super_u_l2;
        self
    }
}

/// Sums in a fixed order so results do not depend on the thread count.
fn ordered_sum<const K: usize>(parts: Vec<[f64; K]>) -> [f64; K] {
    parts.into_iter().fold([0.0; K], |mut acc, p| {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
        acc
    })
}

fn check_grid(grid: &TensorGrid, dofs: &DofMap) -> Result<()> {
    if grid == dofs.grid() {
        Ok(())
    } else {
        Err(Error::Mismatch("field does not live on the given grid".into()))
    }
}

/// `||sigma - sigma_h||`, `||f - div sigma_h||` and `||u - u_h||` by 5-point
/// Gauss quadrature per axis. Only the plain-error part is filled.
pub fn error_norms(
    grid: &TensorGrid,
    exact: &ExactSolution,
    sigma_h: &StressField,
    u_h: &DisplacementField,
) -> Result<ErrorRecord> {
    error_norms_with(grid, exact, sigma_h, u_h, FIELD_QUAD_POINTS)
}

pub fn error_norms_with(
    grid: &TensorGrid,
    exact: &ExactSolution,
    sigma_h: &StressField,
    u_h: &DisplacementField,
    points: usize,
) -> Result<ErrorRecord> {
    check_grid(grid, sigma_h.dofs())?;
    same_map(sigma_h.dofs(), u_h.dofs())?;
    if exact.dim() != grid.dim() {
        return Err(Error::Mismatch("exact solution has the wrong dimension".into()));
    }
    let n = grid.dim();
    let rule = TensorRule::gauss(points, n);
    let space = grid.element_space();
    let parts: Vec<[f64; 3]> = (0..space.len())
        .into_par_iter()
        .map(|e| {
            let elem = space.unflatten(e);
            let bx = grid.element_box(&elem);
            let local = sigma_h.local(&elem);
            let vol = bx.volume();
            let mut x = vec![0.0; n];
            let mut acc = [0.0; 3];
            for (t, w) in rule.iter() {
                bx.to_physical(t, &mut x);
                let ds = exact.sigma(&x) - local.eval_reference(t);
                let dd = exact.f(&x) - local.divergence_reference(t);
                let du = exact.u(&x) - u_h.eval_reference(&elem, t);
                acc[0] += w * vol * ds.norm_squared();
                acc[1] += w * vol * dd.norm_squared();
                acc[2] += w * vol * du.norm_squared();
            }
            acc
        })
        .collect();
    let [s2, d2, u2] = ordered_sum(parts);
    let mut rec = ErrorRecord::for_map(sigma_h.dofs());
    rec.sigma_l2 = s2.sqrt();
    rec.sigma_div = d2.sqrt();
    rec.sigma_hdiv = (s2 + d2).sqrt();
    rec.u_l2 = u2.sqrt();
    Ok(rec)
}

fn quadratic_form(g: &DMatrix<f64>, d: &[f64]) -> f64 {
    let v = DVector::from_column_slice(d);
    v.dot(&(g * &v))
}

/// `||Pi_h sigma - sigma_h||` and `||P_h u - u_h||`, exact through local Gram
/// matrices. Only the superclose part is filled.
pub fn superclose_norms(
    sigma_h: &StressField,
    pi_sigma: &StressField,
    u_h: &DisplacementField,
    ph_u: &DisplacementField,
) -> Result<ErrorRecord> {
    let ds = sigma_h.difference(pi_sigma)?;
    let du = u_h.difference(ph_u)?;
    same_map(ds.dofs(), du.dofs())?;
    let dofs = ds.dofs().clone();
    let grid = dofs.grid();
    // every element of a uniform grid shares the same local matrices
    let reference = grid.element_box(&vec![0; grid.dim()]);
    let g_l2 = local_l2_gram(&reference);
    let g_div = local_div_gram(&reference);
    let g_u = local_displacement_mass(&reference);
    let space = grid.element_space();
    let parts: Vec<[f64; 3]> = (0..space.len())
        .into_par_iter()
        .map(|e| {
            let elem = space.unflatten(e);
            let s: Vec<f64> = dofs
                .element_stress_dofs(&elem)
                .into_iter()
                .map(|g| ds.coefficients()[g])
                .collect();
            let u: Vec<f64> = dofs
                .element_disp_dofs(&elem)
                .into_iter()
                .map(|g| du.coefficients()[g])
                .collect();
            [quadratic_form(&g_l2, &s), quadratic_form(&g_div, &s), quadratic_form(&g_u, &u)]
        })
        .collect();
    let [s2, d2, u2] = ordered_sum(parts);
    let (s2, d2, u2) = (s2.max(0.0), d2.max(0.0), u2.max(0.0));
    let mut rec = ErrorRecord::for_map(&dofs);
    rec.super_sigma_l2 = s2.sqrt();
    rec.super_sigma_div = d2.sqrt();
    rec.super_sigma_hdiv = (s2 + d2).sqrt();
    rec.super_u_l2 = u2.sqrt();
    Ok(rec)
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn fit_rate(hs: &[f64], errors: &[f64]) -> Result<f64> {
    if hs.len() != errors.len() {
        return Err(Error::LengthMismatch {
            expected: hs.len(),
            got: errors.len(),
        });
    }
    if hs.len() < 3 {
        return Err(Error::InvalidInput(format!("a rate fit needs at least 3 levels, got {}", hs.len())));
    }
    if hs.iter().chain(errors).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("rate fit needs positive finite values".into()));
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("mesh sizes must be strictly decreasing".into()));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    Ok(sxy / sxx)
}

/// A fitted rate together with the levels it used.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    /// Index of the first level entering the fit.
    pub first_level: usize,
    pub excluded_coarsest: bool,
}

/// [`fit_rate`] after dropping the coarsest level when at least four are available.
pub fn fit_convergence(hs: &[f64], errors: &[f64]) -> Result<RateFit> {
    let skip = usize::from(hs.len() >= 4);
    let rate = fit_rate(&hs[skip.min(hs.len())..], &errors[skip.min(errors.len())..])?;
    Ok(RateFit {
        rate,
        first_level: skip,
        excluded_coarsest: skip == 1,
    })
}

fn check_budget(dofs: &DofMap, budget: usize) -> Result<()> {
    if dofs.len() > budget {
        Err(Error::TooLarge {
            dofs: dofs.len(),
            budget,
        })
    } else {
        Ok(())
    }
}

/// Smallest eigenvalue of the symmetric pencil `(a, b)` with `b` positive definite.
fn min_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Breakdown("probe Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Breakdown("probe Gram matrix is singular".into()))?;
    let mut c = &linv * a * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigenvalues();
    Ok(eig.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Discrete inf-sup constant
/// `beta_h = min_v sup_tau (div tau, v) / (||tau||_{H(div)} ||v||_0)`,
/// the square root of the smallest eigenvalue of `B S^-1 B^T` relative to the
/// displacement mass matrix, with `S` the H(div) Gram matrix. Dense.
pub fn infsup_probe(grid: &TensorGrid, max_dofs: usize) -> Result<f64> {
    let dofs = DofMap::new(grid);
    check_budget(&dofs, max_dofs)?;
    let system = assemble(grid, &LameParams::new(0.5, 0.0)?);
    let b = system.divergence().to_dense();
    let s = assemble_l2_gram(&dofs).to_dense() + assemble_div_gram(&dofs).to_dense();
    let mass = assemble_displacement_mass(&dofs).to_dense();
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Breakdown("H(div) Gram matrix is not positive definite".into()))?;
    let x = chol.solve(&b.transpose());
    let schur = &b * x;
    let lambda = min_generalized_eigenvalue(&schur, &mass)?;
    Ok(lambda.max(0.0).sqrt())
}

/// Minimum of `(A tau, tau) / ||tau||^2_{H(div)}` over the discrete
/// divergence-free subspace, found from the numerical null space of `B`.
pub fn kernel_ellipticity_probe(grid: &TensorGrid, material: &LameParams, max_dofs: usize) -> Result<f64> {
    let system = assemble(grid, material);
    let dofs = system.dofs().clone();
    check_budget(&dofs, max_dofs)?;
    let b = system.divergence().to_dense();
    let (ns, nu) = (dofs.stress_len(), dofs.disp_len());
    let btb = b.transpose() * &b;
    let eig = btb.symmetric_eigen();
    let mut order: Vec<usize> = (0..ns).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let kernel_dim = ns - nu;
    let z = DMatrix::from_fn(ns, kernel_dim, |r, c| eig.eigenvectors[(r, order[c])]);
    let m = system.compliance().to_dense();
    let s = assemble_l2_gram(&dofs).to_dense() + assemble_div_gram(&dofs).to_dense();
    let zt = z.transpose();
    min_generalized_eigenvalue(&(&zt * m * &z), &(&zt * s * &z))
}

/// Largest relative L2 distance between `div phi_a` and its projection onto
/// `V(K)` over all local stress shape functions on the unit cube of dimension `dim`.
pub fn kernel_inclusion_residual(dim: usize) -> f64 {
    let basis = LocalStressBasis::new(dim);
    let disp = LocalDisplacementBasis::new(dim);
    let rule = TensorRule::gauss(3, dim);
    let size = vec![1.0; dim];
    let gram_inv = nalgebra::Matrix2::new(4.0, -6.0, -6.0, 12.0);
    let mut worst: f64 = 0.0;
    for a in 0..basis.len() {
        let mut moments = vec![[0.0; 2]; dim];
        let mut norm2 = 0.0;
        for (t, w) in rule.iter() {
            let d = basis.divergence(a, t, &size);
            for (i, m) in moments.iter_mut().enumerate() {
                m[0] += w * d[i];
                m[1] += w * d[i] * t[i];
            }
            norm2 += w * d.iter().map(|v| v * v).sum::<f64>();
        }
        let coeffs: Vec<[f64; 2]> = moments
            .iter()
            .map(|m| {
                let c = gram_inv * nalgebra::Vector2::new(m[0], m[1]);
                [c[0], c[1]]
            })
            .collect();
        let mut res2 = 0.0;
        for (t, w) in rule.iter() {
            let d = basis.divergence(a, t, &size);
            for (i, c) in coeffs.iter().enumerate() {
                let p = c[0] * disp.value(2 * i, t) + c[1] * disp.value(2 * i + 1, t);
                res2 += w * (d[i] - p) * (d[i] - p);
            }
        }
        let scale = norm2.sqrt().max(1.0);
        worst = worst.max(res2.max(0.0).sqrt() / scale);
    }
    worst
}

/// Symmetric tensor field whose independent entries are polynomials of total
/// degree at most `degree`, with exact divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialTensorField {
    dim: usize,
    exponents: Vec<Vec<u32>>,
    /// `coeffs[c * monomials + m]` for component `c` in upper-triangular row-major order.
    coeffs: Vec<f64>,
}

fn exponents(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, dim: usize, left: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=left {
            prefix.push(e);
            rec(prefix, dim, left - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), dim, degree, &mut out);
    out
}

impl PolynomialTensorField {
    /// Number of coefficients `from_coefficients` expects.
    pub fn coefficient_count(dim: usize, degree: u32) -> usize {
        exponents(dim, degree).len() * dim * (dim + 1) / 2
    }

    pub fn from_coefficients(dim: usize, degree: u32, coeffs: Vec<f64>) -> Result<Self> {
        let exponents = exponents(dim, degree);
        let expected = exponents.len() * dim * (dim + 1) / 2;
        if coeffs.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self { dim, exponents, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn component_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // upper triangle, row-major
        i * self.dim - i * (i + 1) / 2 + j
    }

    fn poly(&self, c: usize, x: &[f64], deriv: Option<usize>) -> f64 {
        let m = self.exponents.len();
        self.exponents
            .iter()
            .zip(&self.coeffs[c * m..(c + 1) * m])
            .map(|(e, &a)| {
                let mut v = a;
                for (k, (&p, &xk)) in e.iter().zip(x).enumerate() {
                    if deriv == Some(k) {
                        if p == 0 {
                            return 0.0;
                        }
                        v *= p as f64 * xk.powi(p as i32 - 1);
                    } else {
                        v *= xk.powi(p as i32);
                    }
                }
                v
            })
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.poly(self.component_index(i, j), x, None))
    }

    pub fn divergence(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.dim, |i, _| {
            (0..self.dim)
                .map(|j| self.poly(self.component_index(i, j), x, Some(j)))
                .sum()
        })
    }
}

/// Worst `|(div(sigma - Pi_K sigma), v)_K|` over the basis of `V(K)`, and the
/// Cauchy-Schwarz scale `(||div sigma|| + ||div Pi_K sigma||) max ||v||`.
pub fn divergence_moment_defect(field: &PolynomialTensorField, elem: &ElementBox) -> (f64, f64) {
    let n = elem.dim();
    let pi = local_interpolant(|x: &[f64]| field.eval(x), elem);
    let disp = LocalDisplacementBasis::new(n);
    let rule = TensorRule::gauss(4, n);
    let vol = elem.volume();
    let mut moments = vec![0.0; disp.len()];
    let (mut d_exact, mut d_pi) = (0.0, 0.0);
    let mut x = vec![0.0; n];
    for (t, w) in rule.iter() {
        elem.to_physical(t, &mut x);
        let de = field.divergence(&x);
        let dp = pi.divergence_reference(t);
        d_exact += w * vol * de.norm_squared();
        d_pi += w * vol * dp.norm_squared();
        for (b, m) in moments.iter_mut().enumerate() {
            let i = disp.component(b);
            *m += w * vol * (de[i] - dp[i]) * disp.value(b, t);
        }
    }
    let defect = moments.iter().fold(0.0f64, |a, m| a.max(m.abs()));
    // ||v||_K <= sqrt(|K|) for both basis functions
    let scale = (d_exact.sqrt() + d_pi.sqrt()) * vol.sqrt();
    (defect, scale)
}

/// Worst `|(sigma_ij - Pi_ij sigma_ij, tau)_K|` over the nodal basis `tau` of
/// `Q1(x_i, x_j)` and all pairs `i < j`, with its Cauchy-Schwarz scale.
pub fn shear_orthogonality_defect(field: &PolynomialTensorField, elem: &ElementBox) -> (f64, f64) {
    let n = elem.dim();
    let pi = local_interpolant(|x: &[f64]| field.eval(x), elem);
    let rule = TensorRule::gauss(4, n);
    let vol = elem.volume();
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut x = vec![0.0; n];
    for (i, j) in crate::grid::axis_pairs(n) {
        let mut moments = [0.0; 4];
        let (mut ne, mut np) = (0.0, 0.0);
        for (t, w) in rule.iter() {
            elem.to_physical(t, &mut x);
            let e = field.eval(&x)[(i, j)];
            let p = pi.eval_reference(t)[(i, j)];
            ne += w * vol * e * e;
            np += w * vol * p * p;
            for (k, m) in moments.iter_mut().enumerate() {
                let tau = crate::element::nodal_phi(k, t[i], t[j]).0;
                *m += w * vol * (e - p) * tau;
            }
        }
        defect = moments.iter().fold(defect, |a, m| a.max(m.abs()));
        // every nodal function has ||tau||_K = sqrt(|K| / 9)
        scale = scale.max((ne.sqrt() + np.sqrt()) * (vol / 9.0).sqrt());
    }
    (defect, scale)
}
