//! Compressed sparse row storage for symmetric operators and an
//! unpreconditioned conjugate-gradient solver.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
}

impl SparseMatrix {
    /// Validates the CSR layout: offsets nondecreasing, columns in range and
    /// strictly increasing within each row.
    pub fn from_csr(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n + 1 || row_offsets[0] != 0 {
            return Err(Error::InvalidParameter("row_offsets must have length n + 1 and start at 0".into()));
        }
        if *row_offsets.last().unwrap() != col_indices.len() || col_indices.len() != values.len() {
            return Err(Error::InvalidParameter("row_offsets, col_indices and values disagree".into()));
        }
        for w in row_offsets.windows(2) {
            if w[0] > w[1] {
                return Err(Error::InvalidParameter("row_offsets must be nondecreasing".into()));
            }
            let cols = &col_indices[w[0]..w[1]];
            if cols.iter().any(|&c| c >= n) || cols.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::InvalidParameter(
                    "column indices must be in range, sorted and unique per row".into(),
                ));
            }
        }
        Ok(Self { n, row_offsets, col_indices, values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Exact (bitwise) symmetry of the stored entries.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        if y.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: y.len() });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row_offsets[i]..self.row_offsets[i + 1];
            *yi = self.col_indices[r.clone()]
                .iter()
                .zip(&self.values[r])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> SparseMatrix {
        SparseMatrix { values: self.values.iter().map(|v| c * v).collect(), ..self.clone() }
    }

    /// Returns `A + diag(d)`. Every row must store its diagonal entry.
    pub fn add_diagonal(&self, d: &[f64]) -> Result<SparseMatrix> {
        if d.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: d.len() });
        }
        let mut out = self.clone();
        for (i, &di) in d.iter().enumerate() {
            let r = self.row_offsets[i]..self.row_offsets[i + 1];
            let k = self.col_indices[r.clone()].binary_search(&i).map_err(|_| {
                Error::InvalidParameter(format!("row {i} has no stored diagonal entry"))
            })?;
            out.values[r.start + k] += di;
        }
        Ok(out)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from zero.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgReport)> {
    cg_solve_from(a, b, vec![0.0; a.n()], tol, max_iter)
}

/// Conjugate gradients from an initial guess. Stops when
/// `‖b - A x‖₂ ≤ tol·‖b‖₂`, or `≤ tol` when `b = 0`.
pub fn cg_solve_from(
    a: &SparseMatrix,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport)> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("CG tolerance must be positive, got {tol}")));
    }
    for (row, value) in a.diagonal().into_iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositiveDiagonal { row, value });
        }
    }

    let b_norm = norm2(b);
    let threshold = if b_norm > 0.0 { tol * b_norm } else { tol };
    let mut x = x0;
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    // Outer loop restarts from the true residual if the recursive one drifted.
    loop {
        a.spmv_into(&x, &mut ap)?;
        let mut r: Vec<f64> = b.iter().zip(&ap).map(|(bi, axi)| bi - axi).collect();
        let mut rr = dot(&r, &r);
        if rr.sqrt() <= threshold {
            return Ok((x, CgReport { iterations, final_residual_norm: rr.sqrt(), converged: true }));
        }
        if iterations >= max_iter {
            return Err(Error::CgNotConverged(CgReport {
                iterations,
                final_residual_norm: rr.sqrt(),
                converged: false,
            }));
        }
        let mut p = r.clone();
        while iterations < max_iter {
            a.spmv_into(&p, &mut ap)?;
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                // Breakdown: operator not positive definite along p.
                return Err(Error::CgNotConverged(CgReport {
                    iterations,
                    final_residual_norm: rr.sqrt(),
                    converged: false,
                }));
            }
            let step = rr / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            iterations += 1;
            let rr_next = dot(&r, &r);
            if rr_next.sqrt() <= threshold {
                break;
            }
            let beta = rr_next / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_next;
        }
    }
}
