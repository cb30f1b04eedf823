//! Compressed sparse row matrices, a Jacobi-preconditioned conjugate gradient solver and
//! sparse direct factorizations (backed by `faer`).

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed in insertion order.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut b = TripletBuilder::with_capacity(d.len(), d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            b.push(i, i, x);
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `Aᵀ x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (i, j, v) in self.triplets() {
            b.push(j, i, v);
        }
        b.build()
    }

    /// `a * self + b * other`
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for (i, j, v) in self.triplets() {
            t.push(i, j, a * v);
        }
        for (i, j, v) in other.triplets() {
            t.push(i, j, b * v);
        }
        t.build()
    }

    /// `Aᵀ diag(w) A`
    pub fn weighted_gram(&self, w: &[f64]) -> CsrMatrix {
        assert_eq!(w.len(), self.nrows);
        let mut t = TripletBuilder::new(self.ncols, self.ncols);
        for (r, &wr) in w.iter().enumerate() {
            for (i, vi) in self.row(r) {
                for (j, vj) in self.row(r) {
                    t.push(i, j, wr * vi * vj);
                }
            }
        }
        t.build()
    }

    /// Submatrix with the given rows and columns, renumbered in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = TripletBuilder::new(rows.len(), cols.len());
        for (k, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if col_map[j] != usize::MAX {
                    t.push(k, col_map[j], v);
                }
            }
        }
        t.build()
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.triplets().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    /// Coordinate text format, one `row col value` line per stored entry.
    pub fn to_coordinate_text(&self) -> String {
        self.triplets().map(|(i, j, v)| format!("{i} {j} {v:e}\n")).collect()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trips: Vec<Triplet<usize, usize, f64>> = self.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips)
            .map_err(|e| Error::LinearSolver(format!("sparse conversion failed: {e:?}")))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`, starting from the contents of `x`.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> Result<CgStats> {
    let n = b.len();
    let inv_diag: Vec<f64> = a.diag().iter().map(|d| 1.0 / d).collect();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let ax = a.mul_vec(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..=max_iter {
        let res = norm(&r) / bnorm;
        if res <= rel_tol {
            return Ok(CgStats { iterations: it, relative_residual: res });
        }
        if it == max_iter {
            break;
        }
        a.mul_vec_into(&p, &mut ap);
        let step = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver(format!(
        "conjugate gradients did not reach relative residual {rel_tol:e} in {max_iter} iterations"
    )))
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct CholeskyFactor {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl CholeskyFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::LinearSolver("Cholesky requires a square matrix".into()));
        }
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::LinearSolver(format!("Cholesky factorization failed: {e}")))?;
        Ok(Self { n: a.nrows(), llt })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(x, self.n, 1));
    }
}

/// Sparse LU factorization with partial pivoting, used for indefinite systems.
pub struct LuFactor {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::LinearSolver("LU requires a square matrix".into()));
        }
        let lu = a.to_faer()?.sp_lu().map_err(|e| Error::LinearSolver(format!("LU factorization failed: {e:?}")))?;
        Ok(Self { n: a.nrows(), lu })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        assert_eq!(x.len(), self.n);
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(x, self.n, 1));
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::LinearSolver("singular factorization".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0);
            if i > 0 {
                t.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
            }
        }
        t.build()
    }

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(1, 0, 1.0);
        t.push(0, 0, 2.0);
        t.push(1, 0, 0.5);
        let a = t.build();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(1, 0), 1.5);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![2.0, 1.5]);
        assert_eq!(a.mul_transpose_vec(&[1.0, 1.0]), vec![3.5, 0.0]);
    }

    #[test]
    fn solvers_agree() {
        let a = laplacian_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x_cg = vec![0.0; 50];
        let stats = conjugate_gradient(&a, &b, &mut x_cg, 1e-13, 500).unwrap();
        assert!(stats.relative_residual <= 1e-13);
        let mut x_ch = b.clone();
        CholeskyFactor::new(&a).unwrap().solve_in_place(&mut x_ch);
        let mut x_lu = b.clone();
        LuFactor::new(&a).unwrap().solve_in_place(&mut x_lu).unwrap();
        for i in 0..50 {
            assert!((x_cg[i] - x_ch[i]).abs() < 1e-10);
            assert!((x_lu[i] - x_ch[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::diagonal(&[1.0, -1.0]);
        assert!(CholeskyFactor::new(&a).is_err());
    }

    #[test]
    fn gram_and_select() {
        let mut t = TripletBuilder::new(1, 3);
        t.push(0, 0, 1.0);
        t.push(0, 2, -1.0);
        let b = t.build();
        let g = b.weighted_gram(&[2.0]);
        assert_eq!(g.get(0, 0), 2.0);
        assert_eq!(g.get(0, 2), -2.0);
        assert_eq!(g.get(2, 2), 2.0);
        let s = g.select(&[2, 0], &[2, 0]);
        assert_eq!(s.get(0, 1), -2.0);
        assert_eq!(g.max_asymmetry(), 0.0);
    }
}
