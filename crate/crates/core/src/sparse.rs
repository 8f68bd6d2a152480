//! Compressed-row matrices, block systems and reusable LU factorizations.
//!
//! Factorization is delegated to faer's sparse LU with partial pivoting,
//! which handles the indefinite velocity/pressure block system as well as
//! the symmetric positive definite head system. The column ordering is
//! computed from the sparsity pattern alone, and faer runs sequentially, so
//! identical matrices give bitwise-identical factors and solutions.

use std::cell::Cell;
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par};

use crate::error::{Error, Result};

thread_local! {
    static FACTORIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of `factorize` calls made on the current thread.
pub fn factorization_count() -> usize {
    FACTORIZATIONS.with(Cell::get)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed.
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

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, self.entries)
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: vec![1.0; n] }
    }

    /// Sums duplicate entries. Explicit zeros are kept so that matrices built
    /// from the same pattern share structure.
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            assert!(i < nrows && j < ncols, "entry ({i}, {j}) outside {nrows}x{ncols}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = TripletBuilder::new(rows.len(), ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.add(i, j, v);
                }
            }
        }
        t.build()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_add(1.0, x, &mut y);
        y
    }

    /// `y += a * self * x`
    pub fn matvec_add(&self, a: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[p] * x[self.indices[p]];
            }
            *yi += a * s;
        }
    }

    /// `y += a * self^T * x`
    pub fn matvec_transpose_add(&self, a: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += a * v * xi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.add(j, i, v);
            }
        }
        t.build()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `sum_i w_i * M_i` over matrices of equal shape.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Self {
        let (nrows, ncols) = (terms[0].1.nrows, terms[0].1.ncols);
        let cap = terms.iter().map(|(_, m)| m.nnz()).sum();
        let mut t = TripletBuilder::with_capacity(nrows, ncols, cap);
        for (w, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols), "shape mismatch in linear combination");
            for i in 0..nrows {
                for (j, v) in m.row(i) {
                    t.add(i, j, w * v);
                }
            }
        }
        t.build()
    }

    /// Rows `rows` and columns `cols` (given as index lists) of `self`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = TripletBuilder::new(rows.len(), cols.len());
        for (k, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if col_map[j] != usize::MAX {
                    t.add(k, col_map[j], v);
                }
            }
        }
        t.build()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let diff = CsrMatrix::linear_combination(&[(1.0, self), (-1.0, &t)]);
        diff.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Assembles a block matrix; `None` blocks are zero.
    pub fn block(blocks: &[Vec<Option<&CsrMatrix>>]) -> Result<Self> {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, Vec::len);
        let mut row_sizes = vec![None; nbr];
        let mut col_sizes = vec![None; nbc];
        for (bi, brow) in blocks.iter().enumerate() {
            if brow.len() != nbc {
                return Err(Error::DimensionMismatch("ragged block layout".into()));
            }
            for (bj, b) in brow.iter().enumerate() {
                if let Some(m) = b {
                    for (slot, n) in [(&mut row_sizes[bi], m.nrows), (&mut col_sizes[bj], m.ncols)] {
                        match slot {
                            Some(s) if *s != n => {
                                return Err(Error::DimensionMismatch(format!("block ({bi}, {bj}) has wrong shape")))
                            }
                            _ => *slot = Some(n),
                        }
                    }
                }
            }
        }
        let rs: Vec<usize> = row_sizes.iter().map(|s| s.unwrap_or(0)).collect();
        let cs: Vec<usize> = col_sizes.iter().map(|s| s.unwrap_or(0)).collect();
        let roff: Vec<usize> = rs.iter().scan(0, |a, &s| { let o = *a; *a += s; Some(o) }).collect();
        let coff: Vec<usize> = cs.iter().scan(0, |a, &s| { let o = *a; *a += s; Some(o) }).collect();
        let mut t = TripletBuilder::new(rs.iter().sum(), cs.iter().sum());
        for (bi, brow) in blocks.iter().enumerate() {
            for (bj, b) in brow.iter().enumerate() {
                if let Some(m) = b {
                    for i in 0..m.nrows {
                        for (j, v) in m.row(i) {
                            t.add(roff[bi] + i, coff[bj] + j, v);
                        }
                    }
                }
            }
        }
        Ok(t.build())
    }
}

/// LU factors of a square sparse matrix.
pub struct Factorization {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    pub dim: usize,
    pub symmetric: bool,
    pub nnz: usize,
    pub factored_at: Instant,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("dim", &self.dim)
            .field("symmetric", &self.symmetric)
            .field("nnz", &self.nnz)
            .finish()
    }
}

pub fn factorize(a: &CsrMatrix) -> Result<Factorization> {
    if a.nrows != a.ncols {
        return Err(Error::SingularMatrix { rows: a.nrows, cols: a.ncols, reason: "matrix is not square".into() });
    }
    FACTORIZATIONS.with(|c| c.set(c.get() + 1));
    faer::set_global_parallelism(Par::Seq);
    let n = a.nrows;
    let mut trips = Vec::with_capacity(a.nnz());
    for i in 0..n {
        for (j, v) in a.row(i) {
            trips.push(Triplet::new(i, j, v));
        }
    }
    let singular = |reason: String| Error::SingularMatrix { rows: n, cols: n, reason };
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).map_err(|e| singular(format!("{e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| singular(format!("{e:?}")))?;
    let fact = Factorization { lu, dim: n, symmetric: a.asymmetry() == 0.0, nnz: a.nnz(), factored_at: Instant::now() };

    // A zero pivot surfaces as non-finite output rather than an error.
    let probe: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
    let b = a.matvec(&probe);
    let x = fact.solve(&b)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(singular("non-finite solution from factors".into()));
    }
    Ok(fact)
}

impl Factorization {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("rhs length {} for dimension {}", rhs.len(), self.dim)));
        }
        let mut m = Mat::<f64>::from_fn(self.dim, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(m.as_mut());
        Ok((0..self.dim).map(|i| m[(i, 0)]).collect())
    }

    /// Solves for several right-hand sides in one sweep.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rhs.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(r) = rhs.iter().find(|r| r.len() != self.dim) {
            return Err(Error::DimensionMismatch(format!("rhs length {} for dimension {}", r.len(), self.dim)));
        }
        let mut m = Mat::<f64>::from_fn(self.dim, rhs.len(), |i, j| rhs[j][i]);
        self.lu.solve_in_place(m.as_mut());
        Ok((0..rhs.len()).map(|j| (0..self.dim).map(|i| m[(i, j)]).collect()).collect())
    }
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 { num } else { num / den }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_two_by_two() {
        let f = factorize(&CsrMatrix::identity(4)).unwrap();
        assert_eq!(f.solve(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = factorize(&a).unwrap().solve(&[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(factorize(&a), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn counter_counts_factorizations_not_solves() {
        let before = factorization_count();
        let f = factorize(&CsrMatrix::identity(3)).unwrap();
        for _ in 0..5 {
            f.solve(&[1.0, 0.0, 0.0]).unwrap();
        }
        f.solve_many(&[vec![1.0; 3], vec![2.0; 3]]).unwrap();
        assert_eq!(factorization_count() - before, 1);
    }

    #[test]
    fn block_layout() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_dense(&[vec![1.0, 2.0]]);
        let bt = b.transpose();
        let m = CsrMatrix::block(&[vec![Some(&a), Some(&bt)], vec![Some(&b), None]]).unwrap();
        assert_eq!(m.to_dense(), vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 0.0]]);
    }
}
