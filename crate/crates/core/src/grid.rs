//! Uniform tensor grids on intervals and rectangles, interior-node fields,
//! node-weight quadrature and the five-point (three-point in 1D) Dirichlet
//! Laplacian.
//!
//! Boundary nodes are never stored. A grid with `n` cells along an axis has
//! `n - 1` interior nodes on that axis, and in 2D the linear index of node
//! `(ix, iy)` is `ix * ny + iy`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functions::SpatialFn;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    n_cells: Vec<usize>,
    h: Vec<f64>,
}

/// Builds a uniform grid on `[lo, hi]` (1D) or a rectangle (2D).
pub fn build_grid(dim: usize, extents: &[(f64, f64)], n_cells: &[usize]) -> Result<Grid> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
    }
    if extents.len() != dim || n_cells.len() != dim {
        return Err(Error::InvalidGrid(format!(
            "expected {dim} extents and cell counts, got {} and {}",
            extents.len(),
            n_cells.len()
        )));
    }
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    let mut h = Vec::with_capacity(dim);
    for (axis, (&(a, b), &n)) in extents.iter().zip(n_cells).enumerate() {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("axis {axis}: need at least 3 cells, got {n}")));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidGrid(format!("axis {axis}: empty interval [{a}, {b}]")));
        }
        lo.push(a);
        hi.push(b);
        h.push((b - a) / n as f64);
    }
    Ok(Grid { lo, hi, n_cells: n_cells.to_vec(), h })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.n_cells.len()
    }

    pub fn n_cells(&self) -> &[usize] {
        &self.n_cells
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn extents(&self) -> Vec<(f64, f64)> {
        self.lo.iter().copied().zip(self.hi.iter().copied()).collect()
    }

    /// Interior nodes per axis.
    pub fn interior_shape(&self) -> Vec<usize> {
        self.n_cells.iter().map(|n| n - 1).collect()
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.n_cells.iter().map(|n| n - 1).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of every interior node (product of spacings).
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        match multi {
            [i] => *i,
            [ix, iy] => ix * (self.n_cells[1] - 1) + iy,
            _ => panic!("multi-index rank {} does not match grid", multi.len()),
        }
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        match self.dim() {
            1 => vec![idx],
            _ => {
                let ny = self.n_cells[1] - 1;
                vec![idx / ny, idx % ny]
            }
        }
    }

    /// Physical coordinates of interior node `idx`.
    pub fn coordinates(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .into_iter()
            .enumerate()
            .map(|(axis, i)| self.lo[axis] + (i + 1) as f64 * self.h[axis])
            .collect()
    }

    /// Dirichlet eigenvalue of the discrete Laplacian for the product sine
    /// mode with wave numbers `modes` (1-based, one per axis).
    pub fn discrete_eigenvalue(&self, modes: &[u32]) -> f64 {
        self.h
            .iter()
            .zip(&self.n_cells)
            .zip(modes)
            .map(|((&h, &n), &k)| {
                let theta = std::f64::consts::PI * k as f64 / n as f64;
                (2.0 / (h * h)) * (1.0 - theta.cos())
            })
            .sum()
    }
}

/// Real values on the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![c; n] }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    /// `self - other`, nodewise.
    pub fn difference(&self, other: &ScalarField) -> Result<ScalarField> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates a spatial descriptor at every interior node.
pub fn sample(descriptor: &SpatialFn, grid: &Arc<Grid>) -> Result<ScalarField> {
    let values = match descriptor {
        SpatialFn::Values { values } => values.clone(),
        _ => {
            let extents = grid.extents();
            (0..grid.len()).map(|i| descriptor.eval(&grid.coordinates(i), &extents)).collect()
        }
    };
    ScalarField::new(grid.clone(), values)
}

/// Node-weight quadrature of `a * b` over the domain.
pub fn integrate_product(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch);
    }
    Ok(weighted_dot(&a.values, &b.values, a.grid.cell_volume()))
}

pub(crate) fn weighted_dot(a: &[f64], b: &[f64], weight: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * weight
}

pub fn l2_norm(a: &ScalarField) -> f64 {
    weighted_dot(&a.values, &a.values, a.grid.cell_volume()).sqrt()
}

pub fn linf_norm(a: &ScalarField) -> f64 {
    linf(&a.values)
}

pub(crate) fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Matrix of `-Δ_h` on the interior nodes with homogeneous Dirichlet rows
/// eliminated. Symmetric positive definite with non-positive off-diagonals.
pub fn laplacian_matrix(grid: &Grid) -> SparseMatrix {
    let n = grid.len();
    let shape = grid.interior_shape();
    let inv_h2: Vec<f64> = grid.spacing().iter().map(|h| 1.0 / (h * h)).collect();
    let diag: f64 = inv_h2.iter().map(|c| 2.0 * c).sum();

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(n * (1 + 2 * grid.dim()));
    let mut values = Vec::with_capacity(col_indices.capacity());
    row_offsets.push(0);
    for row in 0..n {
        let multi = grid.multi_index(row);
        // Neighbours in ascending column order: -x, -y, self, +y, +x.
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(5);
        for axis in 0..grid.dim() {
            let mut m = multi.clone();
            if multi[axis] > 0 {
                m[axis] -= 1;
                entries.push((grid.linear_index(&m), -inv_h2[axis]));
            }
            let mut m = multi.clone();
            if multi[axis] + 1 < shape[axis] {
                m[axis] += 1;
                entries.push((grid.linear_index(&m), -inv_h2[axis]));
            }
        }
        entries.push((row, diag));
        entries.sort_by_key(|&(c, _)| c);
        for (c, v) in entries {
            col_indices.push(c);
            values.push(v);
        }
        row_offsets.push(col_indices.len());
    }
    SparseMatrix::from_csr(n, row_offsets, col_indices, values)
        .expect("stencil assembly produces a valid CSR layout")
}
