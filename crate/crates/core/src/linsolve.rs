//! Compressed-row sparse matrices and the direct solver for the linearized
//! systems. Factorization is a sparse LU with partial pivoting (faer).

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseRowMatRef, SymbolicSparseRowMatRef};
use faer::Col;

use crate::error::{Error, Result};

/// Default relative residual tolerance for [`solve`].
pub const DEFAULT_LINEAR_TOL: f64 = 1e-10;

const MAX_REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from triplets; duplicates are summed in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut b = TripletBuilder::new(nrows, ncols);
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::DimensionMismatch {
                    expected: nrows.max(ncols),
                    got: i.max(j),
                });
            }
            b.push(i, j, v);
        }
        Ok(b.build())
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates the stored entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// Stored value at `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                b.push(j, i, v);
            }
        }
        b.build()
    }

    /// Keeps rows `rows` and columns `cols` (both given as index lists),
    /// renumbered in list order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for &r in rows {
            scratch.clear();
            scratch.extend(self.row(r).filter_map(|(c, v)| {
                let nc = col_map[c];
                (nc != usize::MAX).then_some((nc, v))
            }));
            scratch.sort_by_key(|e| e.0);
            for &(c, v) in &scratch {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: rows.len(),
            ncols: cols.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Largest entry magnitude of `self - other`; both must have equal shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut m: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m = m.max((v - other.get(i, j)).abs());
            }
            for (j, v) in other.row(i) {
                m = m.max((v - self.get(i, j)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// MatrixMarket coordinate text (1-based indices).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
            }
        }
        s
    }
}

/// Accumulates matrix contributions and compresses them into CSR form.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    /// Stable sort by position, then sum duplicates in insertion order so
    /// the result is bitwise reproducible.
    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; self.nrows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(self.entries.len() / 2);
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// `y = M x`
pub fn spmv(m: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != m.ncols {
        return Err(Error::DimensionMismatch {
            expected: m.ncols,
            got: x.len(),
        });
    }
    Ok((0..m.nrows)
        .map(|i| m.row(i).map(|(j, v)| v * x[j]).sum())
        .collect())
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `M x = b` and guarantees `‖M x − b‖₂ ≤ tol ‖b‖₂`.
///
/// Up to three steps of iterative refinement are applied when the first
/// solution misses the tolerance.
pub fn solve(m: &SparseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = m.nrows;
    if m.ncols != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols,
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if let Some(p) = m.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Singular(format!("non-finite matrix entry at position {p}")));
    }
    let b_norm = norm2(b);
    if n == 0 || b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let symbolic = SymbolicSparseRowMatRef::new_checked(n, n, &m.row_ptr, None, &m.col_idx);
    let view = SparseRowMatRef::new(symbolic, &m.values);
    let lu = view
        .sp_lu()
        .map_err(|e| Error::Singular(format!("{e:?}")))?;

    let rhs = Col::from_fn(n, |i| b[i]);
    let sol = lu.solve(&rhs);
    let mut x: Vec<f64> = (0..n).map(|i| sol[i]).collect();

    let mut residual_norm = f64::INFINITY;
    for step in 0..=MAX_REFINEMENT_STEPS {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("factorization produced non-finite values".into()));
        }
        let mx = spmv(m, &x)?;
        let r: Vec<f64> = b.iter().zip(&mx).map(|(bi, ai)| bi - ai).collect();
        residual_norm = norm2(&r) / b_norm;
        if residual_norm <= tol || step == MAX_REFINEMENT_STEPS {
            break;
        }
        let corr = lu.solve(&Col::from_fn(n, |i| r[i]));
        for (xi, i) in x.iter_mut().zip(0..n) {
            *xi += corr[i];
        }
    }
    if residual_norm <= tol {
        Ok(x)
    } else {
        Err(Error::LinearResidual {
            residual: residual_norm,
            tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spmv_examples() {
        let x = [1.5, -2.0, 3.0];
        assert_eq!(spmv(&SparseMatrix::identity(3), &x).unwrap(), x.to_vec());
        let zero = TripletBuilder::new(3, 3).build();
        assert_eq!(spmv(&zero, &x).unwrap(), vec![0.0; 3]);
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]).unwrap();
        assert_eq!(spmv(&m, &[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
        assert!(matches!(spmv(&m, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn builder_sums_duplicates_and_sorts_columns() {
        let m = SparseMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 0, 4.0), (1, 2, 0.5)]).unwrap();
        assert_eq!(m.row_ptr(), &[0, 1, 3]);
        assert_eq!(m.col_idx(), &[1, 0, 2]);
        assert_eq!(m.values(), &[2.0, 4.0, 1.5]);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 0), 0.0);
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn solve_examples() {
        let b = [1.0, -2.0, 0.5];
        let x = solve(&SparseMatrix::identity(3), &b, DEFAULT_LINEAR_TOL).unwrap();
        assert_eq!(x, b.to_vec());
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]).unwrap();
        let x = solve(&m, &[3.0, 3.0], DEFAULT_LINEAR_TOL).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn solve_needs_pivoting() {
        // zero leading entry: fails without row interchanges
        let m = SparseMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 2, 1.0), (2, 1, -1.0)]).unwrap();
        let b = [2.0, 7.0, 1.0];
        let x = solve(&m, &b, 1e-12).unwrap();
        let r = spmv(&m, &x).unwrap();
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_systems_are_reported() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(solve(&m, &[1.0, 2.0], DEFAULT_LINEAR_TOL).is_err());
        let structurally = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(solve(&structurally, &[1.0, 2.0], DEFAULT_LINEAR_TOL).is_err());
    }

    #[test]
    fn submatrix_and_transpose() {
        let m = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (2, 0, 4.0), (2, 2, 5.0)]).unwrap();
        let s = m.submatrix(&[2, 0], &[2, 0]);
        assert_eq!(s.get(0, 0), 5.0);
        assert_eq!(s.get(0, 1), 4.0);
        assert_eq!(s.get(1, 0), 2.0);
        assert_eq!(s.get(1, 1), 1.0);
        let t = m.transpose();
        assert_eq!(t.get(2, 0), 2.0);
        assert_eq!(t.get(0, 2), 4.0);
        assert_eq!(m.max_abs_diff(&t.transpose()), 0.0);
    }

    #[test]
    fn matrix_market_dump() {
        let m = SparseMatrix::identity(2);
        let text = m.to_matrix_market();
        assert!(text.starts_with("%%MatrixMarket"));
        assert!(text.contains("2 2 2\n1 1 1e0\n2 2 1e0\n"));
    }
}
