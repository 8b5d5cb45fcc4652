//! Manufactured solutions on the unit box with homogeneous displacement data.
//!
//! Every component shares one scalar field `s(x) = prod_k g(x_k)`, so
//! `grad u` has identical rows, `sigma_ij = mu (d_i s + d_j s) + lambda delta_ij sum_k d_k s`
//! and `f_i = (mu + lambda) sum_k d_i d_k s + mu laplace(s)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::material::LameParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolutionKind {
    /// `g(t) = sin(pi t)`
    Sine,
    /// `g(t) = t (1 - t)`
    Polynomial,
}

impl SolutionKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolutionKind::Sine => "sine",
            SolutionKind::Polynomial => "polynomial",
        }
    }

    /// `(g, g', g'')` at `t`.
    fn profile(&self, t: f64) -> [f64; 3] {
        match self {
            SolutionKind::Sine => {
                let (s, c) = (PI * t).sin_cos();
                [s, PI * c, -PI * PI * s]
            }
            SolutionKind::Polynomial => [t * (1.0 - t), 1.0 - 2.0 * t, -2.0],
        }
    }
}

impl fmt::Display for SolutionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolutionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sine" | "sin" => Ok(SolutionKind::Sine),
            "polynomial" | "poly" => Ok(SolutionKind::Polynomial),
            other => Err(Error::InvalidInput(format!(
                "unknown solution '{other}' (expected 'sine' or 'polynomial')"
            ))),
        }
    }
}

/// Exact `u`, `sigma = C eps(u)` and `f = div sigma`. All fields are smooth.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    kind: SolutionKind,
    dim: usize,
    material: LameParams,
}

pub fn sine_solution(dim: usize, material: LameParams) -> Result<ExactSolution> {
    ExactSolution::new(SolutionKind::Sine, dim, material)
}

pub fn polynomial_solution(dim: usize, material: LameParams) -> Result<ExactSolution> {
    ExactSolution::new(SolutionKind::Polynomial, dim, material)
}

pub fn solution_by_name(name: &str, dim: usize, material: LameParams) -> Result<ExactSolution> {
    ExactSolution::new(name.parse()?, dim, material)
}

impl ExactSolution {
    pub fn new(kind: SolutionKind, dim: usize, material: LameParams) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(Self { kind, dim, material })
    }

    pub fn kind(&self) -> SolutionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn material(&self) -> &LameParams {
        &self.material
    }

    fn profiles(&self, x: &[f64]) -> Vec<[f64; 3]> {
        assert_eq!(x.len(), self.dim, "point has wrong dimension");
        x.iter().map(|&t| self.kind.profile(t)).collect()
    }

    /// Product over all axes of `p[k][order[k]]`.
    fn product(p: &[[f64; 3]], order: impl Fn(usize) -> usize) -> f64 {
        p.iter().enumerate().map(|(k, gk)| gk[order(k)]).product()
    }

    fn scalar_gradient(&self, p: &[[f64; 3]]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| Self::product(p, |k| usize::from(k == i)))
            .collect()
    }

    /// Second derivatives `d_i d_j s`.
    fn scalar_hessian(&self, p: &[[f64; 3]]) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Self::product(p, |k| if k == i { 2 } else { 0 })
            } else {
                Self::product(p, |k| usize::from(k == i || k == j))
            }
        })
    }

    pub fn u(&self, x: &[f64]) -> DVector<f64> {
        let s = Self::product(&self.profiles(x), |_| 0);
        DVector::from_element(self.dim, s)
    }

    /// `(grad u)_ij = d_j u_i`
    pub fn grad_u(&self, x: &[f64]) -> DMatrix<f64> {
        let g = self.scalar_gradient(&self.profiles(x));
        DMatrix::from_fn(self.dim, self.dim, |_, j| g[j])
    }

    pub fn strain(&self, x: &[f64]) -> DMatrix<f64> {
        let g = self.grad_u(x);
        (&g + g.transpose()) * 0.5
    }

    pub fn sigma(&self, x: &[f64]) -> DMatrix<f64> {
        let g = self.scalar_gradient(&self.profiles(x));
        let (mu, lambda) = (self.material.mu(), self.material.lambda());
        let div: f64 = g.iter().sum();
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            mu * (g[i] + g[j]) + if i == j { lambda * div } else { 0.0 }
        })
    }

    pub fn f(&self, x: &[f64]) -> DVector<f64> {
        let hess = self.scalar_hessian(&self.profiles(x));
        let (mu, lambda) = (self.material.mu(), self.material.lambda());
        let laplace = hess.trace();
        DVector::from_fn(self.dim, |i, _| (mu + lambda) * hess.row(i).sum() + mu * laplace)
    }
}
