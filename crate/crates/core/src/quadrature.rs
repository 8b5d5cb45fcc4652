//! Gauss–Legendre rules on the unit interval and their tensor products on `[0,1]^d`.

use std::f64::consts::PI;

/// An `n`-point Gauss–Legendre rule mapped to `[0, 1]`.
///
/// Integrates polynomials of degree `2n - 1` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one point");
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton iteration on P_n from the Tricomi initial guess.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points.push(0.5 * (1.0 - x));
            weights.push(0.5 * w);
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Tensor product of a 1D rule over `[0,1]^dim`.
///
/// Points are stored flat with stride `dim`; the first coordinate varies fastest.
#[derive(Debug, Clone)]
pub struct TensorRule {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(rule: &GaussLegendre, dim: usize) -> Self {
        let m = rule.len();
        let count = m.pow(dim as u32);
        let mut coords = Vec::with_capacity(count * dim);
        let mut weights = Vec::with_capacity(count);
        let mut idx = vec![0usize; dim];
        for _ in 0..count {
            let mut w = 1.0;
            for &k in &idx {
                coords.push(rule.points()[k]);
                w *= rule.weights()[k];
            }
            weights.push(w);
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < m {
                    break;
                }
                *slot = 0;
            }
        }
        Self {
            dim,
            coords,
            weights,
        }
    }

    pub fn gauss(points_per_axis: usize, dim: usize) -> Self {
        Self::new(&GaussLegendre::new(points_per_axis), dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Iterates `(reference point, weight)`; weights sum to one.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        let dim = self.dim;
        self.weights
            .iter()
            .enumerate()
            .map(move |(q, &w)| (&self.coords[q * dim..(q + 1) * dim], w))
    }
}
