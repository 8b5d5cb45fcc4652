//! Global numbering and assembly of the mixed system
//!
//! ```text
//! [ M  B^T ] [sigma]   [0]
//! [ B   0  ] [  u  ] = [F]
//! ```
//!
//! with `M_ab = (A phi_a, phi_b)`, `B_ba = (div phi_a, psi_b)` and
//! `F_b = (f, psi_b)`.
//!
//! Stress unknowns come first: for each axis `i` the faces perpendicular to
//! `x_i` followed by the element volume values of `sigma_ii`; then for each
//! pair `(i, j)` the (n-2)-faces perpendicular to both. Displacement unknowns
//! follow, element-major, as `(element, component, moment)`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::element::{
    local_compliance_matrix, local_displacement_mass, local_div_gram, local_div_matrix, local_l2_gram,
    LocalDisplacementBasis, LocalStressBasis, StressDof, FIELD_QUAD_POINTS,
};
use crate::error::Result;
use crate::grid::{Entity, TensorGrid};
use crate::material::LameParams;
use crate::quadrature::TensorRule;
use crate::sparse::CsrMatrix;

/// Geometric owner of a global stress unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StressEntity {
    /// `sigma_ii` on a face perpendicular to `x_i`.
    Face { axis: usize, index: Vec<usize> },
    /// Volume value of `sigma_ii` in an element.
    Volume { axis: usize, element: Vec<usize> },
    /// `sigma_ij` on an (n-2)-face perpendicular to `x_i` and `x_j`.
    Ridge { axes: (usize, usize), index: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    grid: TensorGrid,
    pairs: Vec<(usize, usize)>,
    face_offset: Vec<usize>,
    volume_offset: Vec<usize>,
    ridge_offset: Vec<usize>,
    n_stress: usize,
    n_disp: usize,
}

impl DofMap {
    pub fn new(grid: &TensorGrid) -> Self {
        let n = grid.dim();
        let pairs = grid.axis_pairs();
        let mut next = 0;
        let mut face_offset = Vec::with_capacity(n);
        let mut volume_offset = Vec::with_capacity(n);
        for axis in 0..n {
            face_offset.push(next);
            next += grid.face_count(axis);
            volume_offset.push(next);
            next += grid.element_count();
        }
        let mut ridge_offset = Vec::with_capacity(pairs.len());
        for &p in &pairs {
            ridge_offset.push(next);
            next += grid.ridge_count(p);
        }
        Self {
            grid: grid.clone(),
            pairs,
            face_offset,
            volume_offset,
            ridge_offset,
            n_stress: next,
            n_disp: 2 * n * grid.element_count(),
        }
    }

    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn stress_len(&self) -> usize {
        self.n_stress
    }

    pub fn disp_len(&self) -> usize {
        self.n_disp
    }

    /// Size of the full saddle-point system.
    pub fn len(&self) -> usize {
        self.n_stress + self.n_disp
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn pair_slot(&self, axes: (usize, usize)) -> usize {
        self.pairs
            .iter()
            .position(|&p| p == axes)
            .unwrap_or_else(|| panic!("axis pair {axes:?} not in a {}-d grid", self.dim()))
    }

    pub fn face_dof(&self, axis: usize, index: &[usize]) -> usize {
        self.face_offset[axis] + self.grid.face_space(axis).flatten(index)
    }

    pub fn volume_dof(&self, axis: usize, element: &[usize]) -> usize {
        self.volume_offset[axis] + self.grid.element_space().flatten(element)
    }

    pub fn ridge_dof(&self, axes: (usize, usize), index: &[usize]) -> usize {
        self.ridge_offset[self.pair_slot(axes)] + self.grid.ridge_space(axes).flatten(index)
    }

    /// Index into the displacement vector (not offset by the stress count).
    pub fn disp_dof(&self, element: &[usize], component: usize, moment: usize) -> usize {
        let e = self.grid.element_space().flatten(element);
        (e * self.dim() + component) * 2 + moment
    }

    /// Global index of the stress unknown attached to an entity.
    pub fn entity_dof(&self, entity: &Entity, component: (usize, usize)) -> Option<usize> {
        match entity {
            Entity::Face { axis, index } if component == (*axis, *axis) => Some(self.face_dof(*axis, index)),
            Entity::Element(e) if component.0 == component.1 => Some(self.volume_dof(component.0, e)),
            Entity::Ridge { axes, index } if *axes == component => Some(self.ridge_dof(*axes, index)),
            _ => None,
        }
    }

    /// Global stress indices of an element in local basis order.
    pub fn element_stress_dofs(&self, element: &[usize]) -> Vec<usize> {
        let basis = LocalStressBasis::new(self.dim());
        basis
            .dofs()
            .iter()
            .map(|dof| match *dof {
                StressDof::DiagFace { axis, side } => {
                    let mut idx = element.to_vec();
                    idx[axis] += side;
                    self.face_dof(axis, &idx)
                }
                StressDof::DiagVolume { axis } => self.volume_dof(axis, element),
                StressDof::ShearCorner { axes, corner } => {
                    let mut idx = element.to_vec();
                    idx[axes.0] += corner.0;
                    idx[axes.1] += corner.1;
                    self.ridge_dof(axes, &idx)
                }
            })
            .collect()
    }

    /// Displacement indices of an element in local basis order.
    pub fn element_disp_dofs(&self, element: &[usize]) -> Vec<usize> {
        let start = self.disp_dof(element, 0, 0);
        (start..start + 2 * self.dim()).collect()
    }

    /// Decodes a global stress index.
    pub fn stress_entity(&self, g: usize) -> StressEntity {
        assert!(g < self.n_stress, "stress index {g} out of range");
        for axis in (0..self.dim()).rev() {
            if g >= self.volume_offset[axis] && g < self.volume_offset[axis] + self.grid.element_count() {
                return StressEntity::Volume {
                    axis,
                    element: self.grid.element_space().unflatten(g - self.volume_offset[axis]),
                };
            }
            if g >= self.face_offset[axis] && g < self.volume_offset[axis] {
                return StressEntity::Face {
                    axis,
                    index: self.grid.face_space(axis).unflatten(g - self.face_offset[axis]),
                };
            }
        }
        let slot = self
            .ridge_offset
            .iter()
            .rposition(|&o| o <= g)
            .expect("index past the diagonal blocks");
        let axes = self.pairs[slot];
        StressEntity::Ridge {
            axes,
            index: self.grid.ridge_space(axes).unflatten(g - self.ridge_offset[slot]),
        }
    }

    /// Number of elements referencing each stress unknown.
    pub fn stress_multiplicity(&self) -> Vec<usize> {
        let mut count = vec![0; self.n_stress];
        for e in self.grid.elements() {
            for g in self.element_stress_dofs(&e) {
                count[g] += 1;
            }
        }
        count
    }
}

/// Element-loop scatter of one local stress-stress matrix (uniform grid).
fn scatter_stress(dofs: &DofMap, local: &DMatrix<f64>) -> CsrMatrix {
    let grid = dofs.grid();
    let space = grid.element_space();
    let triplets: Vec<(usize, usize, f64)> = (0..space.len())
        .into_par_iter()
        .flat_map_iter(|e| {
            let g = dofs.element_stress_dofs(&space.unflatten(e));
            let mut t = Vec::with_capacity(g.len() * g.len());
            for (a, &ga) in g.iter().enumerate() {
                for (b, &gb) in g.iter().enumerate() {
                    let v = local[(a, b)];
                    if v != 0.0 {
                        t.push((ga, gb, v));
                    }
                }
            }
            t
        })
        .collect();
    CsrMatrix::from_triplets(dofs.stress_len(), dofs.stress_len(), &triplets)
}

/// The assembled saddle-point operator (load kept separately).
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    dofs: Arc<DofMap>,
    material: LameParams,
    compliance: CsrMatrix,
    divergence: CsrMatrix,
}

impl SaddleSystem {
    pub fn dofs(&self) -> &Arc<DofMap> {
        &self.dofs
    }

    pub fn material(&self) -> &LameParams {
        &self.material
    }

    /// The `M` block.
    pub fn compliance(&self) -> &CsrMatrix {
        &self.compliance
    }

    /// The `B` block, `disp_len x stress_len`.
    pub fn divergence(&self) -> &CsrMatrix {
        &self.divergence
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `[M B^T; B 0] x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let ns = self.dofs.stress_len();
        let (s, u) = x.split_at(ns);
        let mut top = self.compliance.mul_vec(s);
        for (t, v) in top.iter_mut().zip(self.divergence.transpose_mul_vec(u)) {
            *t += v;
        }
        let bottom = self.divergence.mul_vec(s);
        top.extend(bottom);
        top
    }

    /// Right-hand side `[0; F]`.
    pub fn rhs(&self, load: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.dofs.stress_len()];
        b.extend_from_slice(load);
        b
    }

    /// `||K x - [0; F]|| / ||F||` (absolute when `F = 0`).
    pub fn relative_residual(&self, x: &[f64], load: &[f64]) -> f64 {
        let kx = self.apply(x);
        let ns = self.dofs.stress_len();
        let mut r2 = 0.0;
        for (k, v) in kx.iter().enumerate() {
            let b = if k < ns { 0.0 } else { load[k - ns] };
            r2 += (v - b) * (v - b);
        }
        let f = norm(load);
        if f > 0.0 {
            r2.sqrt() / f
        } else {
            r2.sqrt()
        }
    }

    /// The full symmetric matrix as one CSR.
    pub fn full_matrix(&self) -> CsrMatrix {
        let ns = self.dofs.stress_len();
        let mut t: Vec<(usize, usize, f64)> = self.compliance.triplets().collect();
        for (r, c, v) in self.divergence.triplets() {
            t.push((ns + r, c, v));
            t.push((c, ns + r, v));
        }
        CsrMatrix::from_triplets(self.len(), self.len(), &t)
    }

    /// Writes `M.mtx`, `B.mtx` and `K.mtx` into `dir`.
    pub fn export_matrix_market(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, m) in [
            ("M.mtx", &self.compliance),
            ("B.mtx", &self.divergence),
            ("K.mtx", &self.full_matrix()),
        ] {
            let f = BufWriter::new(File::create(dir.join(name))?);
            m.write_matrix_market(f)?;
        }
        Ok(())
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn build_dof_map(grid: &TensorGrid) -> DofMap {
    DofMap::new(grid)
}

/// Assembles `M` and `B`. Every element of a uniform grid has the same local matrices.
pub fn assemble(grid: &TensorGrid, material: &LameParams) -> SaddleSystem {
    let dofs = Arc::new(DofMap::new(grid));
    let reference = grid.element_box(&vec![0; grid.dim()]);
    let local_m = local_compliance_matrix(&reference, material);
    let local_b = local_div_matrix(&reference);
    let compliance = scatter_stress(&dofs, &local_m);

    let space = grid.element_space();
    let triplets: Vec<(usize, usize, f64)> = (0..space.len())
        .into_par_iter()
        .flat_map_iter(|e| {
            let elem = space.unflatten(e);
            let gs = dofs.element_stress_dofs(&elem);
            let gu = dofs.element_disp_dofs(&elem);
            let mut t = Vec::new();
            for (b, &rb) in gu.iter().enumerate() {
                for (a, &ca) in gs.iter().enumerate() {
                    let v = local_b[(b, a)];
                    if v != 0.0 {
                        t.push((rb, ca, v));
                    }
                }
            }
            t
        })
        .collect();
    let divergence = CsrMatrix::from_triplets(dofs.disp_len(), dofs.stress_len(), &triplets);

    SaddleSystem {
        dofs,
        material: *material,
        compliance,
        divergence,
    }
}

/// `F_b = int f . psi_b` with a 5-point Gauss rule per axis.
pub fn assemble_load<F>(grid: &TensorGrid, f: F, dofs: &DofMap) -> Vec<f64>
where
    F: Fn(&[f64]) -> DVector<f64> + Sync,
{
    assemble_load_with(grid, f, dofs, FIELD_QUAD_POINTS)
}

pub fn assemble_load_with<F>(grid: &TensorGrid, f: F, dofs: &DofMap, points: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> DVector<f64> + Sync,
{
    let n = grid.dim();
    let rule = TensorRule::gauss(points, n);
    let disp = LocalDisplacementBasis::new(n);
    let space = grid.element_space();
    let blocks: Vec<Vec<f64>> = (0..space.len())
        .into_par_iter()
        .map(|e| {
            let elem = space.unflatten(e);
            let bx = grid.element_box(&elem);
            let vol = bx.volume();
            let mut x = vec![0.0; n];
            let mut out = vec![0.0; disp.len()];
            for (t, w) in rule.iter() {
                bx.to_physical(t, &mut x);
                let fx = f(&x);
                for (b, slot) in out.iter_mut().enumerate() {
                    *slot += w * vol * fx[disp.component(b)] * disp.value(b, t);
                }
            }
            out
        })
        .collect();
    let mut load = vec![0.0; dofs.disp_len()];
    for (e, block) in blocks.into_iter().enumerate() {
        let elem = space.unflatten(e);
        for (g, v) in dofs.element_disp_dofs(&elem).into_iter().zip(block) {
            load[g] = v;
        }
    }
    load
}

/// Global stress L2 Gram matrix.
pub fn assemble_l2_gram(dofs: &DofMap) -> CsrMatrix {
    let reference = dofs.grid().element_box(&vec![0; dofs.dim()]);
    scatter_stress(dofs, &local_l2_gram(&reference))
}

/// Global `(div tau, div tau')` Gram matrix.
pub fn assemble_div_gram(dofs: &DofMap) -> CsrMatrix {
    let reference = dofs.grid().element_box(&vec![0; dofs.dim()]);
    scatter_stress(dofs, &local_div_gram(&reference))
}

/// Block-diagonal mass matrix of the displacement space.
pub fn assemble_displacement_mass(dofs: &DofMap) -> CsrMatrix {
    let reference = dofs.grid().element_box(&vec![0; dofs.dim()]);
    let local = local_displacement_mass(&reference);
    let mut t = Vec::new();
    for elem in dofs.grid().elements() {
        let g = dofs.element_disp_dofs(&elem);
        for (a, &ga) in g.iter().enumerate() {
            for (b, &gb) in g.iter().enumerate() {
                if local[(a, b)] != 0.0 {
                    t.push((ga, gb, local[(a, b)]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(dofs.disp_len(), dofs.disp_len(), &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::stress_dofs;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    #[test]
    fn counts_2d() {
        let d = DofMap::new(&TensorGrid::unit(2, 2).unwrap());
        assert_eq!(d.stress_len(), 29);
        assert_eq!(d.disp_len(), 16);
        assert_eq!(d.len(), 45);
        let d = DofMap::new(&TensorGrid::unit(2, 1).unwrap());
        assert_eq!(d.stress_len(), 10);
        assert_eq!(d.disp_len(), 4);
    }

    #[test]
    fn counts_closed_form_2d() {
        for n in 1..=6 {
            let d = DofMap::new(&TensorGrid::unit(2, n).unwrap());
            assert_eq!(d.stress_len(), 2 * (n * (n + 1) + n * n) + (n + 1) * (n + 1));
            assert_eq!(d.disp_len(), 4 * n * n);
        }
    }

    #[test]
    fn counts_3d() {
        let d = DofMap::new(&TensorGrid::unit(3, 2).unwrap());
        assert_eq!(d.stress_len(), 114);
        assert_eq!(d.disp_len(), 48);
    }

    #[test]
    fn sharing_multiplicities() {
        for dim in 2..=3 {
            let g = TensorGrid::unit(dim, 3).unwrap();
            let d = DofMap::new(&g);
            let mult = d.stress_multiplicity();
            for (k, &m) in mult.iter().enumerate() {
                let expect = match d.stress_entity(k) {
                    StressEntity::Volume { .. } => 1,
                    StressEntity::Face { axis, index } => {
                        g.entity_adjacency(&Entity::Face { axis, index }).unwrap().len()
                    }
                    StressEntity::Ridge { axes, index } => {
                        g.entity_adjacency(&Entity::Ridge { axes, index }).unwrap().len()
                    }
                };
                assert_eq!(m, expect, "dof {k}");
                assert!(m >= 1);
            }
            for e in g.elements() {
                let mut s = d.element_stress_dofs(&e);
                s.sort();
                s.dedup();
                assert_eq!(s.len(), 2 * dim * dim + dim);
            }
        }
    }

    #[test]
    fn entity_decoding_round_trip() {
        let g = TensorGrid::new(3, &[(0.0, 1.0); 3], &[2, 3, 1]).unwrap();
        let d = DofMap::new(&g);
        for k in 0..d.stress_len() {
            let back = match d.stress_entity(k) {
                StressEntity::Face { axis, index } => d.face_dof(axis, &index),
                StressEntity::Volume { axis, element } => d.volume_dof(axis, &element),
                StressEntity::Ridge { axes, index } => d.ridge_dof(axes, &index),
            };
            assert_eq!(back, k);
        }
    }

    #[test]
    fn single_element_equals_local() {
        let g = TensorGrid::unit(2, 1).unwrap();
        let mat = LameParams::new(0.7, 2.0).unwrap();
        let sys = assemble(&g, &mat);
        let bx = g.element_box(&[0, 0]);
        // local ordering coincides with global ordering up to a permutation
        let gs = sys.dofs().element_stress_dofs(&[0, 0]);
        let m = sys.compliance().to_dense();
        let lm = local_compliance_matrix(&bx, &mat);
        let lb = local_div_matrix(&bx);
        let bd = sys.divergence().to_dense();
        for a in 0..10 {
            for b in 0..10 {
                assert_eq!(m[(gs[a], gs[b])], lm[(a, b)]);
            }
            for r in 0..4 {
                assert_eq!(bd[(r, gs[a])], lb[(r, a)]);
            }
        }
    }

    #[test]
    fn compliance_block_is_spd() {
        let mut rng = StdRng::seed_from_u64(2);
        let g = TensorGrid::new(2, &[(0.0, 1.0), (0.0, 2.0)], &[3, 2]).unwrap();
        let sys = assemble(&g, &LameParams::new(0.5, 10.0).unwrap());
        assert!(sys.compliance().asymmetry() < 1e-15);
        for _ in 0..20 {
            let x: Vec<f64> = (0..sys.dofs().stress_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mx = sys.compliance().mul_vec(&x);
            let e: f64 = x.iter().zip(&mx).map(|(a, b)| a * b).sum();
            assert!(e > 0.0);
        }
        let dense = sys.compliance().to_dense();
        assert!(dense.cholesky().is_some());
    }

    #[test]
    fn constant_field_is_divergence_free() {
        let g = TensorGrid::unit(3, 2).unwrap();
        let sys = assemble(&g, &LameParams::new(1.0, 1.0).unwrap());
        let d = sys.dofs();
        let x: Vec<f64> = (0..d.stress_len())
            .map(|k| match d.stress_entity(k) {
                StressEntity::Ridge { .. } => 0.0,
                _ => 1.0,
            })
            .collect();
        let bx = sys.divergence().mul_vec(&x);
        assert!(bx.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn load_examples() {
        let g = TensorGrid::unit(2, 1).unwrap();
        let d = DofMap::new(&g);
        let zero = assemble_load(&g, |_x: &[f64]| DVector::zeros(2), &d);
        assert!(zero.iter().all(|&v| v == 0.0));
        let f = assemble_load(&g, |_x: &[f64]| DVector::from_vec(vec![1.0, 0.0]), &d);
        assert!((f[0] - 1.0).abs() < 1e-15);
        assert!((f[1] - 0.5).abs() < 1e-15);
        assert!(f[2].abs() < 1e-15 && f[3].abs() < 1e-15);
    }

    #[test]
    fn load_matches_divergence_of_interpolated_polynomial() {
        // sigma = [[x^2 + c, xy], [xy, y^2 + c]] lies in Sigma_h, div sigma = (3x, 3y)
        let g = TensorGrid::unit(2, 3).unwrap();
        let sys = assemble(&g, &LameParams::new(0.5, 1.0).unwrap());
        let d = sys.dofs().clone();
        let sigma = |x: &[f64]| {
            DMatrix::from_row_slice(2, 2, &[x[0] * x[0] + 2.0, x[0] * x[1], x[0] * x[1], x[1] * x[1] + 2.0])
        };
        let mut coeffs = vec![0.0; d.stress_len()];
        for e in g.elements() {
            let local = stress_dofs(sigma, &g.element_box(&e));
            for (k, gk) in d.element_stress_dofs(&e).into_iter().enumerate() {
                coeffs[gk] = local[k];
            }
        }
        let bs = sys.divergence().mul_vec(&coeffs);
        let f = assemble_load(&g, |x: &[f64]| DVector::from_vec(vec![3.0 * x[0], 3.0 * x[1]]), &d);
        for (a, b) in bs.iter().zip(&f) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn assembly_is_affine_in_material() {
        let g = TensorGrid::unit(2, 2).unwrap();
        let a = assemble(&g, &LameParams::new(0.5, 0.0).unwrap()).compliance().to_dense();
        let b = assemble(&g, &LameParams::new(0.25, 0.0).unwrap()).compliance().to_dense();
        assert!((b - &a * 2.0).amax() < 1e-14);
        // M(mu, lambda) = (G - c T) / (2 mu): linear in c for fixed mu
        let m1 = assemble(&g, &LameParams::new(0.5, 1.0).unwrap()).compliance().to_dense();
        let m2 = assemble(&g, &LameParams::new(0.5, 3.0).unwrap()).compliance().to_dense();
        let (c1, c2) = (1.0 / 3.0, 3.0 / 7.0);
        let t1 = (&a - &m1) / c1;
        let t2 = (&a - &m2) / c2;
        assert!((t1 - t2).amax() < 1e-13);
    }

    #[test]
    fn matrix_market_export() {
        let g = TensorGrid::unit(2, 1).unwrap();
        let sys = assemble(&g, &LameParams::new(0.5, 1.0).unwrap());
        let dir = tempfile::tempdir().unwrap();
        sys.export_matrix_market(dir.path()).unwrap();
        let k = std::fs::read_to_string(dir.path().join("K.mtx")).unwrap();
        assert!(k.lines().nth(1).unwrap().starts_with("14 14 "));
    }
}
