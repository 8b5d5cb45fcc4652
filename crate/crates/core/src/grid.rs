//! Uniform tensor-product meshes of an n-dimensional box.
//!
//! Elements, (n-1)-faces and (n-2)-faces ("ridges") are addressed by
//! structured ids: an axis (or pair of axes) plus a zero-based multi-index.
//! Every family is flattened with the first index varying fastest.

use crate::error::{Error, Result};

/// A rectangular range of multi-indices, `0 <= idx[k] < extents[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSpace {
    extents: Vec<usize>,
}

impl IndexSpace {
    pub fn new(extents: Vec<usize>) -> Self {
        Self { extents }
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, idx: &[usize]) -> bool {
        idx.len() == self.extents.len() && idx.iter().zip(&self.extents).all(|(i, e)| i < e)
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        debug_assert!(self.contains(idx), "{idx:?} outside {:?}", self.extents);
        let mut flat = 0;
        for (i, e) in idx.iter().zip(&self.extents).rev() {
            flat = flat * e + i;
        }
        flat
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        self.extents
            .iter()
            .map(|&e| {
                let i = flat % e;
                flat /= e;
                i
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(move |k| self.unflatten(k))
    }
}

/// An axis-aligned box `prod [lower_k, lower_k + size_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementBox {
    lower: Vec<f64>,
    size: Vec<f64>,
}

impl ElementBox {
    pub fn new(lower: Vec<f64>, size: Vec<f64>) -> Result<Self> {
        if lower.len() != size.len() || lower.is_empty() {
            return Err(Error::InvalidGrid(format!(
                "box needs matching non-empty corner/size, got {} and {}",
                lower.len(),
                size.len()
            )));
        }
        if size.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidGrid(format!("degenerate box size {size:?}")));
        }
        if lower.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite box corner {lower:?}")));
        }
        Ok(Self { lower, size })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            size: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn size(&self) -> &[f64] {
        &self.size
    }

    pub fn volume(&self) -> f64 {
        self.size.iter().product()
    }

    /// Maps reference coordinates in `[0,1]^n` to physical ones.
    pub fn to_physical(&self, t: &[f64], out: &mut [f64]) {
        for k in 0..self.dim() {
            out[k] = self.lower[k] + t[k] * self.size[k];
        }
    }

    pub fn physical(&self, t: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.to_physical(t, &mut x);
        x
    }

    pub fn to_reference(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lower)
            .zip(&self.size)
            .map(|((x, a), h)| (x - a) / h)
            .collect()
    }
}

/// Structured id of a mesh entity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Entity {
    Element(Vec<usize>),
    /// (n-1)-face perpendicular to `axis`; `index[axis]` is the plane number `0..=N_axis`.
    Face { axis: usize, index: Vec<usize> },
    /// (n-2)-face perpendicular to `axes.0 < axes.1`; in 2D these are the vertices.
    Ridge { axes: (usize, usize), index: Vec<usize> },
}

/// Uniform rectangular grid of `prod [a_k, b_k]` with `N_k` cells per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
}

impl TensorGrid {
    pub fn new(dim: usize, bounds: &[(f64, f64)], subdivisions: &[usize]) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidGrid(format!("dimension must be >= 2, got {dim}")));
        }
        if bounds.len() != dim || subdivisions.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} intervals and subdivisions, got {} and {}",
                bounds.len(),
                subdivisions.len()
            )));
        }
        for (k, &(a, b)) in bounds.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidGrid(format!("empty interval [{a}, {b}] on axis {k}")));
            }
        }
        if let Some(k) = subdivisions.iter().position(|&n| n == 0) {
            return Err(Error::InvalidGrid(format!("zero subdivisions on axis {k}")));
        }
        Ok(Self {
            lower: bounds.iter().map(|b| b.0).collect(),
            upper: bounds.iter().map(|b| b.1).collect(),
            cells: subdivisions.to_vec(),
        })
    }

    /// `[0,1]^dim` with `n` cells per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, &vec![(0.0, 1.0); dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn subdivisions(&self) -> &[usize] {
        &self.cells
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.lower.iter().copied().zip(self.upper.iter().copied()).collect()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.cells[axis] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.spacing(k)).collect()
    }

    /// Largest cell width over all axes.
    pub fn h(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).fold(0.0, f64::max)
    }

    /// Coordinate of grid plane `index` along `axis`.
    pub fn node(&self, axis: usize, index: usize) -> f64 {
        if index == self.cells[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + index as f64 * self.spacing(axis)
        }
    }

    pub fn element_space(&self) -> IndexSpace {
        IndexSpace::new(self.cells.clone())
    }

    pub fn face_space(&self, axis: usize) -> IndexSpace {
        let mut e = self.cells.clone();
        e[axis] += 1;
        IndexSpace::new(e)
    }

    pub fn ridge_space(&self, axes: (usize, usize)) -> IndexSpace {
        let mut e = self.cells.clone();
        e[axes.0] += 1;
        e[axes.1] += 1;
        IndexSpace::new(e)
    }

    pub fn element_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn face_count(&self, axis: usize) -> usize {
        self.face_space(axis).len()
    }

    pub fn total_face_count(&self) -> usize {
        (0..self.dim()).map(|k| self.face_count(k)).sum()
    }

    pub fn ridge_count(&self, axes: (usize, usize)) -> usize {
        self.ridge_space(axes).len()
    }

    /// All axis pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn axis_pairs(&self) -> Vec<(usize, usize)> {
        axis_pairs(self.dim())
    }

    pub fn elements(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let space = self.element_space();
        (0..space.len()).map(move |k| space.unflatten(k))
    }

    pub fn element_box(&self, element: &[usize]) -> ElementBox {
        let lower = element
            .iter()
            .enumerate()
            .map(|(k, &l)| self.node(k, l))
            .collect();
        let size = self.spacings();
        ElementBox { lower, size }
    }

    /// Multi-index of the element containing `x` (points on interior planes go to the upper cell).
    pub fn locate(&self, x: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            if x[k] < self.lower[k] || x[k] > self.upper[k] {
                return None;
            }
            let l = ((x[k] - self.lower[k]) / self.spacing(k)).floor() as usize;
            idx.push(l.min(self.cells[k] - 1));
        }
        Some(idx)
    }

    /// The face of `element` perpendicular to `axis` on side `side` (0 = lower, 1 = upper).
    pub fn element_face(&self, element: &[usize], axis: usize, side: usize) -> Entity {
        let mut index = element.to_vec();
        index[axis] += side;
        Entity::Face { axis, index }
    }

    /// The ridge of `element` perpendicular to `axes` at corner `(a, b)` in `{0,1}^2`.
    pub fn element_ridge(&self, element: &[usize], axes: (usize, usize), corner: (usize, usize)) -> Entity {
        let mut index = element.to_vec();
        index[axes.0] += corner.0;
        index[axes.1] += corner.1;
        Entity::Ridge { axes, index }
    }

    fn check_entity(&self, entity: &Entity) -> Result<()> {
        let ok = match entity {
            Entity::Element(idx) => self.element_space().contains(idx),
            Entity::Face { axis, index } => *axis < self.dim() && self.face_space(*axis).contains(index),
            Entity::Ridge { axes, index } => {
                axes.0 < axes.1 && axes.1 < self.dim() && self.ridge_space(*axes).contains(index)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidEntity(format!("{entity:?} is not part of this grid")))
        }
    }

    /// Elements containing `entity`, in lexicographic (first index fastest) order.
    pub fn entity_adjacency(&self, entity: &Entity) -> Result<Vec<Vec<usize>>> {
        self.check_entity(entity)?;
        let (axes, index): (Vec<usize>, &Vec<usize>) = match entity {
            Entity::Element(idx) => return Ok(vec![idx.clone()]),
            Entity::Face { axis, index } => (vec![*axis], index),
            Entity::Ridge { axes, index } => (vec![axes.0, axes.1], index),
        };
        let mut out = Vec::new();
        for mask in 0..(1usize << axes.len()) {
            let mut elem = index.clone();
            let mut inside = true;
            for (bit, &axis) in axes.iter().enumerate() {
                if mask >> bit & 1 == 0 {
                    if index[axis] == 0 {
                        inside = false;
                    } else {
                        elem[axis] = index[axis] - 1;
                    }
                } else if index[axis] == self.cells[axis] {
                    inside = false;
                }
            }
            if inside {
                out.push(elem);
            }
        }
        Ok(out)
    }

    /// True when the entity lies on the domain boundary.
    pub fn is_boundary(&self, entity: &Entity) -> bool {
        match entity {
            Entity::Element(_) => false,
            Entity::Face { axis, index } => index[*axis] == 0 || index[*axis] == self.cells[*axis],
            Entity::Ridge { axes, index } => {
                let (i, j) = *axes;
                index[i] == 0 || index[i] == self.cells[i] || index[j] == 0 || index[j] == self.cells[j]
            }
        }
    }
}

pub fn axis_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(dim * dim.saturating_sub(1) / 2);
    for i in 0..dim {
        for j in (i + 1)..dim {
            pairs.push((i, j));
        }
    }
    pairs
}
