//! Global discrete fields, the canonical stress interpolation `Pi_h` and the
//! elementwise L2 projection `P_h` onto the displacement space.
//!
//! `Pi_h` matches face and volume averages of `sigma_ii` and the
//! (n-2)-face averages of `sigma_ij`; in two dimensions the (n-2)-faces are
//! vertices and the shear values are point values.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;

use crate::assembly::{DofMap, StressEntity};
use crate::element::{entity_average, local_from_dofs, LocalDisplacementBasis, LocalStress, FIELD_QUAD_POINTS};
use crate::error::{Error, Result};
use crate::quadrature::TensorRule;

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

/// A member of the global stress space, one coefficient per shared entity.
#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    dofs: Arc<DofMap>,
    coeffs: Vec<f64>,
}

impl StressField {
    pub fn new(dofs: Arc<DofMap>, coeffs: Vec<f64>) -> Result<Self> {
        check_len(dofs.stress_len(), coeffs.len())?;
        Ok(Self { dofs, coeffs })
    }

    pub fn zeros(dofs: Arc<DofMap>) -> Self {
        let coeffs = vec![0.0; dofs.stress_len()];
        Self { dofs, coeffs }
    }

    pub fn dofs(&self) -> &Arc<DofMap> {
        &self.dofs
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coeffs
    }

    /// The restriction to one element.
    pub fn local(&self, element: &[usize]) -> LocalStress {
        let c: Vec<f64> = self
            .dofs
            .element_stress_dofs(element)
            .into_iter()
            .map(|g| self.coeffs[g])
            .collect();
        local_from_dofs(&c, &self.dofs.grid().element_box(element)).expect("local length matches")
    }

    /// Value at a physical point; `None` outside the domain.
    pub fn eval(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let e = self.dofs.grid().locate(x)?;
        Some(self.local(&e).eval(x))
    }

    pub fn divergence(&self, x: &[f64]) -> Option<DVector<f64>> {
        let e = self.dofs.grid().locate(x)?;
        Some(self.local(&e).divergence(x))
    }

    /// `self - other`, both on the same discretisation.
    pub fn difference(&self, other: &StressField) -> Result<StressField> {
        same_map(&self.dofs, &other.dofs)?;
        Ok(StressField {
            dofs: self.dofs.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }
}

/// A member of the global displacement space.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    dofs: Arc<DofMap>,
    coeffs: Vec<f64>,
}

impl DisplacementField {
    pub fn new(dofs: Arc<DofMap>, coeffs: Vec<f64>) -> Result<Self> {
        check_len(dofs.disp_len(), coeffs.len())?;
        Ok(Self { dofs, coeffs })
    }

    pub fn zeros(dofs: Arc<DofMap>) -> Self {
        let coeffs = vec![0.0; dofs.disp_len()];
        Self { dofs, coeffs }
    }

    pub fn dofs(&self) -> &Arc<DofMap> {
        &self.dofs
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coeffs
    }

    /// Value in `element` at reference point `t`.
    pub fn eval_reference(&self, element: &[usize], t: &[f64]) -> DVector<f64> {
        let n = self.dofs.dim();
        let basis = LocalDisplacementBasis::new(n);
        let mut v = DVector::zeros(n);
        for (b, g) in self.dofs.element_disp_dofs(element).into_iter().enumerate() {
            v[basis.component(b)] += self.coeffs[g] * basis.value(b, t);
        }
        v
    }

    pub fn eval(&self, x: &[f64]) -> Option<DVector<f64>> {
        let grid = self.dofs.grid();
        let e = grid.locate(x)?;
        let t = grid.element_box(&e).to_reference(x);
        Some(self.eval_reference(&e, &t))
    }

    pub fn difference(&self, other: &DisplacementField) -> Result<DisplacementField> {
        same_map(&self.dofs, &other.dofs)?;
        Ok(DisplacementField {
            dofs: self.dofs.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }
}

pub(crate) fn same_map(a: &Arc<DofMap>, b: &Arc<DofMap>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::Mismatch("fields live on different grids".into()))
    }
}

/// `Pi_h sigma` with the default 5-point averages.
pub fn interp_stress<F>(dofs: &Arc<DofMap>, sigma: F) -> StressField
where
    F: Fn(&[f64]) -> DMatrix<f64> + Sync,
{
    interp_stress_with(dofs, sigma, FIELD_QUAD_POINTS)
}

pub fn interp_stress_with<F>(dofs: &Arc<DofMap>, sigma: F, points: usize) -> StressField
where
    F: Fn(&[f64]) -> DMatrix<f64> + Sync,
{
    let grid = dofs.grid();
    let cells = grid.subdivisions();
    // An entity is averaged from the first element touching it.
    let owner = |index: &[usize], axes: &[usize]| -> (Vec<usize>, Vec<f64>) {
        let mut elem = index.to_vec();
        let mut sides = Vec::with_capacity(axes.len());
        for &a in axes {
            if index[a] == cells[a] {
                elem[a] -= 1;
                sides.push(1.0);
            } else {
                sides.push(0.0);
            }
        }
        (elem, sides)
    };
    let coeffs: Vec<f64> = (0..dofs.stress_len())
        .into_par_iter()
        .map(|g| match dofs.stress_entity(g) {
            StressEntity::Face { axis, index } => {
                let (elem, sides) = owner(&index, &[axis]);
                let bx = grid.element_box(&elem);
                entity_average(&bx, &[(axis, sides[0])], points, |x| sigma(x)[(axis, axis)])
            }
            StressEntity::Volume { axis, element } => {
                let bx = grid.element_box(&element);
                entity_average(&bx, &[], points, |x| sigma(x)[(axis, axis)])
            }
            StressEntity::Ridge { axes: (i, j), index } => {
                let (elem, sides) = owner(&index, &[i, j]);
                let bx = grid.element_box(&elem);
                entity_average(&bx, &[(i, sides[0]), (j, sides[1])], points, |x| sigma(x)[(i, j)])
            }
        })
        .collect();
    StressField {
        dofs: dofs.clone(),
        coeffs,
    }
}

/// `P_h u`: per element and component, the L2-best fit in `span{1, t_i}`.
pub fn project_displacement<F>(dofs: &Arc<DofMap>, u: F) -> DisplacementField
where
    F: Fn(&[f64]) -> DVector<f64> + Sync,
{
    project_displacement_with(dofs, u, FIELD_QUAD_POINTS)
}

pub fn project_displacement_with<F>(dofs: &Arc<DofMap>, u: F, points: usize) -> DisplacementField
where
    F: Fn(&[f64]) -> DVector<f64> + Sync,
{
    let grid = dofs.grid();
    let n = grid.dim();
    let rule = TensorRule::gauss(points, n);
    let gram_inv = Matrix2::new(1.0, 0.5, 0.5, 1.0 / 3.0)
        .try_inverse()
        .expect("moment matrix is invertible");
    let space = grid.element_space();
    let blocks: Vec<Vec<f64>> = (0..space.len())
        .into_par_iter()
        .map(|e| {
            let bx = grid.element_box(&space.unflatten(e));
            let mut moments = vec![Vector2::zeros(); n];
            let mut x = vec![0.0; n];
            for (t, w) in rule.iter() {
                bx.to_physical(t, &mut x);
                let ux = u(&x);
                for i in 0..n {
                    moments[i] += Vector2::new(w * ux[i], w * ux[i] * t[i]);
                }
            }
            moments
                .into_iter()
                .flat_map(|m| {
                    let c = gram_inv * m;
                    [c[0], c[1]]
                })
                .collect()
        })
        .collect();
    let mut coeffs = vec![0.0; dofs.disp_len()];
    for (e, block) in blocks.into_iter().enumerate() {
        for (g, v) in dofs.element_disp_dofs(&space.unflatten(e)).into_iter().zip(block) {
            coeffs[g] = v;
        }
    }
    DisplacementField {
        dofs: dofs.clone(),
        coeffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TensorGrid;

    fn map(dim: usize, n: usize) -> Arc<DofMap> {
        Arc::new(DofMap::new(&TensorGrid::unit(dim, n).unwrap()))
    }

    #[test]
    fn reproduces_local_space_globally() {
        let d = map(2, 4);
        let sigma = |x: &[f64]| DMatrix::from_row_slice(2, 2, &[x[0] * x[0], x[0] * x[1], x[0] * x[1], x[1] * x[1]]);
        let pi = interp_stress(&d, sigma);
        for &p in &[[0.13, 0.77], [0.5, 0.5], [0.99, 0.01], [0.3, 0.3]] {
            let v = pi.eval(&p).unwrap();
            assert!((v - sigma(&p)).amax() < 1e-13);
        }
    }

    #[test]
    fn normal_stress_constant_across_axis() {
        let d = map(2, 1);
        let pi = interp_stress(&d, |x: &[f64]| DMatrix::from_row_slice(2, 2, &[x[1], 0.0, 0.0, 0.0]));
        for &p in &[[0.0, 0.0], [0.4, 0.9], [1.0, 1.0]] {
            assert!((pi.eval(&p).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_examples() {
        let d = map(2, 1);
        let p = project_displacement(&d, |x: &[f64]| DVector::from_vec(vec![x[0] * x[0], x[1]]));
        // component 1: x - 1/6; component 2 is y itself
        let c = p.coefficients();
        assert!((c[0] + 1.0 / 6.0).abs() < 1e-14 && (c[1] - 1.0).abs() < 1e-14);
        assert!(c[2].abs() < 1e-14 && (c[3] - 1.0).abs() < 1e-14);

        let q = project_displacement(&d, |x: &[f64]| DVector::from_vec(vec![x[1], 0.0]));
        assert!((q.coefficients()[0] - 0.5).abs() < 1e-14);
        assert!(q.coefficients()[1].abs() < 1e-14);
    }

    #[test]
    fn projection_is_idempotent() {
        let d = map(3, 2);
        let u = |x: &[f64]| DVector::from_vec(vec![x[0].sin(), x[1] * x[2], (x[2] * 3.0).exp()]);
        let p = project_displacement(&d, u);
        let pp = project_displacement(&d, |x: &[f64]| p.eval(x).unwrap());
        for (a, b) in p.coefficients().iter().zip(pp.coefficients()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let a = StressField::zeros(map(2, 2));
        let b = StressField::zeros(map(2, 3));
        assert!(a.difference(&b).is_err());
        assert!(StressField::new(map(2, 2), vec![0.0; 3]).is_err());
        assert!(a.difference(&StressField::zeros(map(2, 2))).is_ok());
    }
}
