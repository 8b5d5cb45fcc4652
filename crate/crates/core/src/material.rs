//! Isotropic linear elasticity: compliance `A` and stiffness `C = A^{-1}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Lamé parameters `(mu, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameParams {
    mu: f64,
    lambda: f64,
}

impl LameParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidMaterial(format!("mu must be positive, got {mu}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidMaterial(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(Self { mu, lambda })
    }

    /// From Young's modulus and Poisson's ratio (3D relations).
    pub fn from_young_poisson(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !(0.0..0.5).contains(&poisson) {
            return Err(Error::InvalidMaterial(format!(
                "need E > 0 and 0 <= nu < 1/2, got E={young}, nu={poisson}"
            )));
        }
        let mu = young / (2.0 * (1.0 + poisson));
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        Self::new(mu, lambda)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }

    pub fn young_modulus(&self) -> f64 {
        self.mu * (3.0 * self.lambda + 2.0 * self.mu) / (self.lambda + self.mu)
    }

    /// `2 mu + n lambda`; `A` maps `delta` to `delta / (2 mu + n lambda)`.
    pub fn volumetric_modulus(&self, dim: usize) -> f64 {
        2.0 * self.mu + dim as f64 * self.lambda
    }

    /// Coefficient of `tr(sigma) delta` inside the compliance bracket.
    pub fn trace_coupling(&self, dim: usize) -> f64 {
        self.lambda / self.volumetric_modulus(dim)
    }

    /// Smallest eigenvalue of `A` on symmetric tensors.
    pub fn compliance_lower_bound(&self, dim: usize) -> f64 {
        1.0 / self.volumetric_modulus(dim)
    }

    /// `A sigma = (sigma - lambda/(2mu + n lambda) tr(sigma) delta) / (2 mu)`.
    pub fn apply_compliance(&self, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = check_symmetric(sigma)?;
        let c = self.trace_coupling(n);
        let tr = sigma.trace();
        let mut out = sigma.clone();
        for k in 0..n {
            out[(k, k)] -= c * tr;
        }
        out /= 2.0 * self.mu;
        Ok(out)
    }

    /// `C eps = 2 mu eps + lambda tr(eps) delta`.
    pub fn apply_stiffness(&self, eps: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = check_symmetric(eps)?;
        let tr = eps.trace();
        let mut out = eps * (2.0 * self.mu);
        for k in 0..n {
            out[(k, k)] += self.lambda * tr;
        }
        Ok(out)
    }
}

fn check_symmetric(t: &DMatrix<f64>) -> Result<usize> {
    if t.nrows() != t.ncols() {
        return Err(Error::LengthMismatch {
            expected: t.nrows(),
            got: t.ncols(),
        });
    }
    let scale = t.amax().max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..t.nrows() {
        for j in (i + 1)..t.ncols() {
            worst = worst.max((t[(i, j)] - t[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::Asymmetric(worst));
    }
    Ok(t.nrows())
}
