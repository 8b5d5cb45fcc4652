//! Local stress and displacement spaces on a single n-rectangle.
//!
//! On an element with reference coordinates `t in [0,1]^n`:
//!
//! * `sigma_ii` lies in `span{1, t_i, t_i^2}` and carries three degrees of
//!   freedom: its averages over the two faces perpendicular to `x_i` and its
//!   volume average;
//! * `sigma_ij` (`i < j`) lies in `span{1, t_i, t_j, t_i t_j}` and carries
//!   four: its averages over the (n-2)-faces perpendicular to `x_i` and `x_j`
//!   (point values at the vertices when `n = 2`);
//! * `v_i` lies in `span{1, t_i}`.
//!
//! The stress basis is dual to those functionals, so shared entity values are
//! shared coefficients. Local ordering: for each axis `[face 0, face 1,
//! volume]`, then for each pair `(i, j)` the corners `(t_i, t_j) = (0,0),
//! (1,0), (0,1), (1,1)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{axis_pairs, ElementBox};
use crate::material::LameParams;
use crate::quadrature::TensorRule;

/// Points per axis for element matrices; exact to degree 5 per axis.
pub const MATRIX_QUAD_POINTS: usize = 3;
/// Points per axis for averages of smooth fields.
pub const FIELD_QUAD_POINTS: usize = 5;

pub const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StressDof {
    /// Average of `sigma_ii` over the face `t_axis = side`.
    DiagFace { axis: usize, side: usize },
    /// Volume average of `sigma_ii`.
    DiagVolume { axis: usize },
    /// Average of `sigma_ij` over the (n-2)-face at `(t_i, t_j) = corner`.
    ShearCorner { axes: (usize, usize), corner: (usize, usize) },
}

impl StressDof {
    /// Tensor entry `(i, j)`, `i <= j`, carried by this degree of freedom.
    pub fn component(&self) -> (usize, usize) {
        match *self {
            StressDof::DiagFace { axis, .. } | StressDof::DiagVolume { axis } => (axis, axis),
            StressDof::ShearCorner { axes, .. } => axes,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        !matches!(self, StressDof::ShearCorner { .. })
    }
}

/// Number of local stress functions, `2n^2 + n`.
pub fn stress_dim(n: usize) -> usize {
    2 * n * n + n
}

/// Number of local displacement functions, `2n`.
pub fn displacement_dim(n: usize) -> usize {
    2 * n
}

// 1D quadratics dual to (value at 0, value at 1, mean over [0,1]).
fn diag_shape(kind: usize, t: f64) -> (f64, f64) {
    match kind {
        0 => (1.0 - 4.0 * t + 3.0 * t * t, -4.0 + 6.0 * t),
        1 => (-2.0 * t + 3.0 * t * t, -2.0 + 6.0 * t),
        _ => (6.0 * t * (1.0 - t), 6.0 - 12.0 * t),
    }
}

/// Bilinear nodal functions on the unit square, `k = 0..3` at
/// `(0,0), (1,0), (1,1), (0,1)`. Returns `(value, d/dx, d/dy)`.
pub fn nodal_phi(k: usize, x: f64, y: f64) -> (f64, f64, f64) {
    match k {
        0 => ((x - 1.0) * (y - 1.0), y - 1.0, x - 1.0),
        1 => (-x * (y - 1.0), -(y - 1.0), -x),
        2 => (x * y, y, x),
        3 => (-(x - 1.0) * y, -y, -(x - 1.0)),
        _ => panic!("nodal function index {k} out of range"),
    }
}

fn corner_to_nodal(corner: (usize, usize)) -> usize {
    match corner {
        (0, 0) => 0,
        (1, 0) => 1,
        (1, 1) => 2,
        (0, 1) => 3,
        _ => panic!("corner {corner:?} out of range"),
    }
}

/// Shape functions of `Sigma(K)` dual to the stress degrees of freedom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalStressBasis {
    dim: usize,
    dofs: Vec<StressDof>,
}

impl LocalStressBasis {
    pub fn new(dim: usize) -> Self {
        let mut dofs = Vec::with_capacity(stress_dim(dim));
        for axis in 0..dim {
            dofs.push(StressDof::DiagFace { axis, side: 0 });
            dofs.push(StressDof::DiagFace { axis, side: 1 });
            dofs.push(StressDof::DiagVolume { axis });
        }
        for axes in axis_pairs(dim) {
            for corner in CORNERS {
                dofs.push(StressDof::ShearCorner { axes, corner });
            }
        }
        Self { dim, dofs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn dofs(&self) -> &[StressDof] {
        &self.dofs
    }

    /// Value of the single independent entry of shape function `a` at reference point `t`.
    pub fn value(&self, a: usize, t: &[f64]) -> f64 {
        match self.dofs[a] {
            StressDof::DiagFace { axis, side } => diag_shape(side, t[axis]).0,
            StressDof::DiagVolume { axis } => diag_shape(2, t[axis]).0,
            StressDof::ShearCorner { axes, corner } => {
                nodal_phi(corner_to_nodal(corner), t[axes.0], t[axes.1]).0
            }
        }
    }

    /// Full symmetric tensor of shape function `a` at `t`.
    pub fn tensor(&self, a: usize, t: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let (i, j) = self.dofs[a].component();
        let v = self.value(a, t);
        m[(i, j)] = v;
        m[(j, i)] = v;
        m
    }

    /// Adds the (physical) row-wise divergence of `coeff * phi_a` at `t` into `out`.
    pub fn add_divergence(&self, a: usize, coeff: f64, t: &[f64], size: &[f64], out: &mut [f64]) {
        match self.dofs[a] {
            StressDof::DiagFace { axis, side } => {
                out[axis] += coeff * diag_shape(side, t[axis]).1 / size[axis];
            }
            StressDof::DiagVolume { axis } => {
                out[axis] += coeff * diag_shape(2, t[axis]).1 / size[axis];
            }
            StressDof::ShearCorner { axes: (i, j), corner } => {
                let (_, dx, dy) = nodal_phi(corner_to_nodal(corner), t[i], t[j]);
                out[i] += coeff * dy / size[j];
                out[j] += coeff * dx / size[i];
            }
        }
    }

    pub fn divergence(&self, a: usize, t: &[f64], size: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_divergence(a, 1.0, t, size, &mut out);
        out
    }
}

/// Basis of `V(K)`: function `2 i + m` is `e_i` times `1` (`m = 0`) or `t_i` (`m = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalDisplacementBasis {
    dim: usize,
}

impl LocalDisplacementBasis {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        displacement_dim(self.dim)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn component(&self, b: usize) -> usize {
        b / 2
    }

    pub fn value(&self, b: usize, t: &[f64]) -> f64 {
        if b.is_multiple_of(2) {
            1.0
        } else {
            t[b / 2]
        }
    }
}

/// Average of `f` over the sub-box of `elem` where the axes in `fixed` are
/// pinned to the given reference coordinates. With nothing left free this is
/// a point evaluation.
pub fn entity_average<F>(elem: &ElementBox, fixed: &[(usize, f64)], points: usize, f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let n = elem.dim();
    let free: Vec<usize> = (0..n).filter(|k| fixed.iter().all(|(a, _)| a != k)).collect();
    let rule = TensorRule::gauss(points, free.len());
    let mut t = vec![0.0; n];
    for &(axis, value) in fixed {
        t[axis] = value;
    }
    let mut x = vec![0.0; n];
    let mut acc = 0.0;
    for (s, w) in rule.iter() {
        for (slot, &axis) in free.iter().enumerate() {
            t[axis] = s[slot];
        }
        elem.to_physical(&t, &mut x);
        acc += w * f(&x);
    }
    acc
}

/// Evaluates the stress degrees of freedom of a smooth field on `elem`.
///
/// `field` maps a physical point to a symmetric `n x n` tensor. Averages use
/// `points`-point Gauss rules per free axis.
pub fn stress_dofs_with<F>(field: F, elem: &ElementBox, points: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    let basis = LocalStressBasis::new(elem.dim());
    basis
        .dofs()
        .iter()
        .map(|dof| stress_dof_value(&field, elem, dof, points))
        .collect()
}

pub fn stress_dofs<F>(field: F, elem: &ElementBox) -> Vec<f64>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    stress_dofs_with(field, elem, FIELD_QUAD_POINTS)
}

pub(crate) fn stress_dof_value<F>(field: &F, elem: &ElementBox, dof: &StressDof, points: usize) -> f64
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    let (i, j) = dof.component();
    let entry = |x: &[f64]| field(x)[(i, j)];
    match *dof {
        StressDof::DiagFace { axis, side } => entity_average(elem, &[(axis, side as f64)], points, entry),
        StressDof::DiagVolume { .. } => entity_average(elem, &[], points, entry),
        StressDof::ShearCorner { axes, corner } => entity_average(
            elem,
            &[(axes.0, corner.0 as f64), (axes.1, corner.1 as f64)],
            points,
            entry,
        ),
    }
}

/// A member of `Sigma(K)` given by its local coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStress {
    basis: LocalStressBasis,
    elem: ElementBox,
    coeffs: Vec<f64>,
}

impl LocalStress {
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn element(&self) -> &ElementBox {
        &self.elem
    }

    pub fn eval_reference(&self, t: &[f64]) -> DMatrix<f64> {
        let n = self.basis.dim();
        let mut m = DMatrix::zeros(n, n);
        for (a, dof) in self.basis.dofs().iter().enumerate() {
            let (i, j) = dof.component();
            let v = self.coeffs[a] * self.basis.value(a, t);
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        m
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        self.eval_reference(&self.elem.to_reference(x))
    }

    pub fn divergence_reference(&self, t: &[f64]) -> DVector<f64> {
        let mut out = vec![0.0; self.basis.dim()];
        for a in 0..self.basis.len() {
            self.basis
                .add_divergence(a, self.coeffs[a], t, self.elem.size(), &mut out);
        }
        DVector::from_vec(out)
    }

    pub fn divergence(&self, x: &[f64]) -> DVector<f64> {
        self.divergence_reference(&self.elem.to_reference(x))
    }
}

/// Builds the local stress whose degrees of freedom are `coeffs`.
pub fn local_from_dofs(coeffs: &[f64], elem: &ElementBox) -> Result<LocalStress> {
    let basis = LocalStressBasis::new(elem.dim());
    if coeffs.len() != basis.len() {
        return Err(Error::LengthMismatch {
            expected: basis.len(),
            got: coeffs.len(),
        });
    }
    Ok(LocalStress {
        basis,
        elem: elem.clone(),
        coeffs: coeffs.to_vec(),
    })
}

/// Canonical local interpolant `Pi_K sigma`.
pub fn local_interpolant<F>(field: F, elem: &ElementBox) -> LocalStress
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    let coeffs = stress_dofs(field, elem);
    LocalStress {
        basis: LocalStressBasis::new(elem.dim()),
        elem: elem.clone(),
        coeffs,
    }
}

/// Shape-function values and divergences at the points of a tensor rule.
pub(crate) struct Tabulation {
    pub dim: usize,
    pub len: usize,
    pub weights: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// `values[q * len + a]`
    pub values: Vec<f64>,
    /// `divs[(q * len + a) * dim + k]`
    pub divs: Vec<f64>,
}

impl Tabulation {
    pub fn new(basis: &LocalStressBasis, elem: &ElementBox, points_per_axis: usize) -> Self {
        let dim = basis.dim();
        let len = basis.len();
        let rule = TensorRule::gauss(points_per_axis, dim);
        let vol = elem.volume();
        let mut weights = Vec::with_capacity(rule.len());
        let mut points = Vec::with_capacity(rule.len());
        let mut values = Vec::with_capacity(rule.len() * len);
        let mut divs = vec![0.0; rule.len() * len * dim];
        for (q, (t, w)) in rule.iter().enumerate() {
            weights.push(w * vol);
            points.push(t.to_vec());
            for a in 0..len {
                values.push(basis.value(a, t));
                let slot = &mut divs[(q * len + a) * dim..(q * len + a + 1) * dim];
                basis.add_divergence(a, 1.0, t, elem.size(), slot);
            }
        }
        Self {
            dim,
            len,
            weights,
            points,
            values,
            divs,
        }
    }

    pub fn div(&self, q: usize, a: usize) -> &[f64] {
        let s = (q * self.len + a) * self.dim;
        &self.divs[s..s + self.dim]
    }
}

/// `int_K (A phi_a) : phi_b` with `A` the compliance of `material`.
pub fn local_compliance_matrix(elem: &ElementBox, material: &LameParams) -> DMatrix<f64> {
    let basis = LocalStressBasis::new(elem.dim());
    let tab = Tabulation::new(&basis, elem, MATRIX_QUAD_POINTS);
    compliance_from_tabulation(&basis, &tab, material)
}

/// Local L2 Gram matrix `int_K phi_a : phi_b` (Frobenius product).
pub fn local_l2_gram(elem: &ElementBox) -> DMatrix<f64> {
    let unit = LameParams::new(0.5, 0.0).expect("valid parameters");
    local_compliance_matrix(elem, &unit)
}

fn compliance_from_tabulation(basis: &LocalStressBasis, tab: &Tabulation, material: &LameParams) -> DMatrix<f64> {
    let n = basis.dim();
    let len = basis.len();
    let c = material.trace_coupling(n);
    let inv2mu = 0.5 / material.mu();
    let dofs = basis.dofs();
    let mut m = DMatrix::zeros(len, len);
    for (q, &w) in tab.weights.iter().enumerate() {
        let vals = &tab.values[q * len..(q + 1) * len];
        for a in 0..len {
            let ca = dofs[a].component();
            let diag_a = ca.0 == ca.1;
            for b in a..len {
                let cb = dofs[b].component();
                let diag_b = cb.0 == cb.1;
                let prod = vals[a] * vals[b];
                let mut e = 0.0;
                if ca == cb {
                    e += if diag_a { prod } else { 2.0 * prod };
                }
                if diag_a && diag_b {
                    e -= c * prod;
                }
                m[(a, b)] += w * inv2mu * e;
            }
        }
    }
    for a in 0..len {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    m
}

/// `int_K div(phi_a) . psi_b`, shape `(2n) x (2n^2 + n)`.
pub fn local_div_matrix(elem: &ElementBox) -> DMatrix<f64> {
    let basis = LocalStressBasis::new(elem.dim());
    let disp = LocalDisplacementBasis::new(elem.dim());
    let tab = Tabulation::new(&basis, elem, MATRIX_QUAD_POINTS);
    let mut m = DMatrix::zeros(disp.len(), basis.len());
    for (q, &w) in tab.weights.iter().enumerate() {
        let t = &tab.points[q];
        for b in 0..disp.len() {
            let psi = disp.value(b, t);
            let comp = disp.component(b);
            for a in 0..basis.len() {
                m[(b, a)] += w * tab.div(q, a)[comp] * psi;
            }
        }
    }
    m
}

/// `int_K div(phi_a) . div(phi_b)`.
pub fn local_div_gram(elem: &ElementBox) -> DMatrix<f64> {
    let basis = LocalStressBasis::new(elem.dim());
    let tab = Tabulation::new(&basis, elem, MATRIX_QUAD_POINTS);
    let len = basis.len();
    let mut m = DMatrix::zeros(len, len);
    for (q, &w) in tab.weights.iter().enumerate() {
        for a in 0..len {
            let da = tab.div(q, a);
            for b in a..len {
                let db = tab.div(q, b);
                let dot: f64 = da.iter().zip(db).map(|(x, y)| x * y).sum();
                m[(a, b)] += w * dot;
            }
        }
    }
    for a in 0..len {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    m
}

/// Mass matrix of `V(K)`: per component `|K| [[1, 1/2], [1/2, 1/3]]`.
pub fn local_displacement_mass(elem: &ElementBox) -> DMatrix<f64> {
    let n = elem.dim();
    let vol = elem.volume();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(2 * i, 2 * i)] = vol;
        m[(2 * i, 2 * i + 1)] = vol / 2.0;
        m[(2 * i + 1, 2 * i)] = vol / 2.0;
        m[(2 * i + 1, 2 * i + 1)] = vol / 3.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn random_box(rng: &mut StdRng, n: usize) -> ElementBox {
        ElementBox::new(
            (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            (0..n).map(|_| rng.random_range(0.05..1.5)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn local_dimensions() {
        assert_eq!(LocalStressBasis::new(2).len(), 10);
        assert_eq!(LocalStressBasis::new(3).len(), 21);
        assert_eq!(LocalStressBasis::new(4).len(), 36);
        assert_eq!(LocalDisplacementBasis::new(3).len(), 6);
    }

    #[test]
    fn nodal_functions_partition_unity_and_interpolate() {
        for &(x, y) in &[(0.1, 0.7), (0.5, 0.5), (0.9, 0.2)] {
            let s: f64 = (0..4).map(|k| nodal_phi(k, x, y).0).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
        let nodes = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        for k in 0..4 {
            for (m, &(x, y)) in nodes.iter().enumerate() {
                let expect = if k == m { 1.0 } else { 0.0 };
                assert_eq!(nodal_phi(k, x, y).0, expect);
            }
        }
    }

    #[test]
    fn identity_field_dofs() {
        let mut rng = StdRng::seed_from_u64(1);
        for n in 2..=3 {
            let elem = random_box(&mut rng, n);
            let dofs = stress_dofs(|_x: &[f64]| DMatrix::identity(n, n), &elem);
            let basis = LocalStressBasis::new(n);
            for (d, v) in basis.dofs().iter().zip(&dofs) {
                let expect = if d.is_diagonal() { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quadratic_normal_stress_dofs() {
        let elem = ElementBox::unit(2);
        let dofs = stress_dofs(
            |x: &[f64]| DMatrix::from_row_slice(2, 2, &[x[0] * x[0], 0.0, 0.0, 0.0]),
            &elem,
        );
        assert!(dofs[0].abs() < 1e-15);
        assert!((dofs[1] - 1.0).abs() < 1e-15);
        assert!((dofs[2] - 1.0 / 3.0).abs() < 1e-15);
        assert!(dofs[3..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn bilinear_shear_corner_values() {
        let elem = ElementBox::unit(2);
        let dofs = stress_dofs(
            |x: &[f64]| {
                let s = x[0] * x[1];
                DMatrix::from_row_slice(2, 2, &[0.0, s, s, 0.0])
            },
            &elem,
        );
        assert_eq!(&dofs[6..10], &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn from_dofs_recovers_quadratic() {
        let elem = ElementBox::unit(2);
        let mut coeffs = vec![0.0; 10];
        coeffs[1] = 1.0;
        coeffs[2] = 1.0 / 3.0;
        let s = local_from_dofs(&coeffs, &elem).unwrap();
        for &x in &[0.0, 0.2, 0.5, 0.9, 1.0] {
            let v = s.eval(&[x, 0.3]);
            assert!((v[(0, 0)] - x * x).abs() < 1e-15);
        }
    }

    #[test]
    fn shear_corners_sum_to_one() {
        let elem = ElementBox::unit(2);
        let mut coeffs = vec![0.0; 10];
        coeffs[6..10].copy_from_slice(&[1.0; 4]);
        let s = local_from_dofs(&coeffs, &elem).unwrap();
        let v = s.eval(&[0.37, 0.81]);
        assert!((v[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((v[(1, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(matches!(
            local_from_dofs(&[0.0; 9], &ElementBox::unit(2)),
            Err(Error::LengthMismatch { expected: 10, got: 9 })
        ));
    }

    #[test]
    fn unit_coefficient_gives_shape_function() {
        let elem = ElementBox::new(vec![0.5, -1.0, 2.0], vec![0.25, 0.5, 2.0]).unwrap();
        let basis = LocalStressBasis::new(3);
        for a in 0..basis.len() {
            let mut e = vec![0.0; basis.len()];
            e[a] = 1.0;
            let s = local_from_dofs(&e, &elem).unwrap();
            let t = [0.3, 0.6, 0.1];
            assert!((s.eval_reference(&t) - basis.tensor(a, &t)).amax() < 1e-15);
        }
    }

    #[test]
    fn duality_random_coefficients() {
        let mut rng = StdRng::seed_from_u64(7);
        for n in 2..=3 {
            for _ in 0..100 {
                let elem = random_box(&mut rng, n);
                let coeffs: Vec<f64> = (0..stress_dim(n)).map(|_| rng.random_range(-1.0..1.0)).collect();
                let s = local_from_dofs(&coeffs, &elem).unwrap();
                let back = stress_dofs(|x: &[f64]| s.eval(x), &elem);
                let scale = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (a, b) in coeffs.iter().zip(&back) {
                    assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn compliance_identity_when_unit_shear_modulus() {
        let elem = ElementBox::new(vec![0.0, 0.0], vec![0.5, 2.0]).unwrap();
        let m = local_compliance_matrix(&elem, &LameParams::new(0.5, 0.0).unwrap());
        assert_eq!(m, local_l2_gram(&elem));
    }

    #[test]
    fn compliance_of_identity_field() {
        let elem = ElementBox::unit(2);
        let mat = LameParams::new(0.5, 1.0).unwrap();
        let m = local_compliance_matrix(&elem, &mat);
        // delta has all diagonal dofs equal to one.
        let basis = LocalStressBasis::new(2);
        let x = DVector::from_iterator(
            basis.len(),
            basis.dofs().iter().map(|d| if d.is_diagonal() { 1.0 } else { 0.0 }),
        );
        let e = (x.transpose() * &m * &x)[(0, 0)];
        assert!((e - 2.0 / 3.0).abs() < 1e-14, "{e}");
    }

    #[test]
    fn compliance_spd_with_spectral_bound() {
        let mut rng = StdRng::seed_from_u64(17);
        for n in 2..=3 {
            for &lambda in &[0.0, 1.0, 1e6] {
                let elem = random_box(&mut rng, n);
                let mat = LameParams::new(0.5, lambda).unwrap();
                let m = local_compliance_matrix(&elem, &mat);
                assert!((&m - m.transpose()).amax() < 1e-14 * m.amax());
                let g = local_l2_gram(&elem);
                let min_m = m.clone().symmetric_eigenvalues().min();
                let min_g = g.symmetric_eigenvalues().min();
                assert!(min_m > 0.0, "n={n} lambda={lambda}: {min_m}");
                let bound = mat.compliance_lower_bound(n) * min_g;
                assert!(min_m >= bound * (1.0 - 1e-8), "{min_m} < {bound}");
            }
        }
    }

    #[test]
    fn div_matrix_linear_normal_stress() {
        // sigma_11 = x_1 on [0,1]^2 has dofs (0, 1, 1/2).
        let elem = ElementBox::unit(2);
        let b = local_div_matrix(&elem);
        let mut x = DVector::zeros(10);
        x[1] = 1.0;
        x[2] = 0.5;
        let y = &b * x;
        assert!((y[0] - 1.0).abs() < 1e-15);
        assert!((y[1] - 0.5).abs() < 1e-15);
        assert!(y[2].abs() < 1e-15 && y[3].abs() < 1e-15);
    }

    #[test]
    fn div_matrix_annihilates_constants() {
        let elem = ElementBox::new(vec![1.0, 2.0, 3.0], vec![0.1, 0.2, 0.3]).unwrap();
        let b = local_div_matrix(&elem);
        let field = |_x: &[f64]| DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let x = DVector::from_vec(stress_dofs(field, &elem));
        assert!((&b * x).amax() < 1e-13);
    }

    #[test]
    fn displacement_mass_matches_quadrature() {
        let elem = ElementBox::new(vec![0.0, 1.0], vec![0.5, 0.25]).unwrap();
        let m = local_displacement_mass(&elem);
        let disp = LocalDisplacementBasis::new(2);
        let rule = TensorRule::gauss(3, 2);
        for a in 0..4 {
            for b in 0..4 {
                let q: f64 = rule
                    .iter()
                    .map(|(t, w)| {
                        if disp.component(a) == disp.component(b) {
                            w * elem.volume() * disp.value(a, t) * disp.value(b, t)
                        } else {
                            0.0
                        }
                    })
                    .sum();
                assert!((m[(a, b)] - q).abs() < 1e-15);
            }
        }
    }
}
