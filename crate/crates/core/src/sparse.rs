//! Compressed sparse row storage and the operator algebra on top of it.
//!
//! Operators are assembled from coordinate triplets, sorted into canonical
//! `(row, col)` order with duplicates summed, and only then used for
//! products. Matrix-vector products visit entries in storage order, so
//! results are bit-reproducible for identical inputs.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: vec![], values: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![C64::new(1.0, 0.0); n] }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self::from_triplets(diag.len(), diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect(), 0.0)
    }

    /// Canonical assembly: sort by `(row, col)`, sum duplicates, drop entries
    /// with magnitude `<= drop_tol` (exact zeros are always dropped).
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>, drop_tol: f64) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        let mut i = 0;
        while i < triplets.len() {
            let (r, c, mut v) = triplets[i];
            debug_assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            let mut j = i + 1;
            while j < triplets.len() && triplets[j].0 == r && triplets[j].1 == c {
                v += triplets[j].2;
                j += 1;
            }
            if v.norm() > drop_tol || (drop_tol == 0.0 && v != C64::new(0.0, 0.0)) {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
            i = j;
        }
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    /// Builds from per-row entry lists that are already sorted by column and
    /// free of duplicates.
    pub(crate) fn from_sorted_rows(ncols: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        self.map_transpose(|v| v)
    }

    pub fn adjoint(&self) -> Self {
        self.map_transpose(|v| v.conj())
    }

    fn map_transpose(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![C64::new(0.0, 0.0); self.nnz()];
        // rows are visited in increasing order, so each output row stays sorted
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let dst = next[c];
                col_idx[dst] = r;
                values[dst] = f(self.values[k]);
                next[c] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        if c == C64::new(0.0, 0.0) {
            return CsrMatrix::zeros(self.nrows, self.ncols);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let rows = (0..self.nrows)
            .map(|r| {
                let mut merged: Vec<(usize, C64)> = Vec::new();
                let (mut a, mut b) = (self.row(r).peekable(), other.row(r).peekable());
                loop {
                    let next = match (a.peek(), b.peek()) {
                        (Some(&(ca, va)), Some(&(cb, vb))) => {
                            if ca == cb {
                                a.next();
                                b.next();
                                (ca, va + vb)
                            } else if ca < cb {
                                a.next();
                                (ca, va)
                            } else {
                                b.next();
                                (cb, vb)
                            }
                        }
                        (Some(&e), None) => {
                            a.next();
                            e
                        }
                        (None, Some(&e)) => {
                            b.next();
                            e
                        }
                        (None, None) => break,
                    };
                    if next.1 != C64::new(0.0, 0.0) {
                        merged.push(next);
                    }
                }
                merged
            })
            .collect();
        Ok(CsrMatrix::from_sorted_rows(self.ncols, rows))
    }

    /// Sparse product; entries with magnitude `<= drop_tol` are pruned.
    pub fn mul(&self, other: &Self, drop_tol: f64) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch(format!("cannot multiply {}x{} by {}x{}", self.nrows, self.ncols, other.nrows, other.ncols)));
        }
        let mut acc = vec![C64::new(0.0, 0.0); other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut rows = Vec::with_capacity(self.nrows);
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            let mut row = Vec::with_capacity(cols.len());
            for &c in &cols {
                let v = acc[c];
                if v.norm() > drop_tol || (drop_tol == 0.0 && v != C64::new(0.0, 0.0)) {
                    row.push((c, v));
                }
                acc[c] = C64::new(0.0, 0.0);
                touched[c] = false;
            }
            cols.clear();
            rows.push(row);
        }
        Ok(CsrMatrix::from_sorted_rows(other.ncols, rows))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for (r, c, v) in self.triplets() {
            out[[r, c]] = v;
        }
        out
    }

    pub fn from_dense(m: &Array2<C64>) -> Self {
        let rows = m
            .rows()
            .into_iter()
            .map(|row| row.iter().enumerate().filter(|(_, v)| **v != C64::new(0.0, 0.0)).map(|(c, v)| (c, *v)).collect())
            .collect();
        CsrMatrix::from_sorted_rows(m.ncols(), rows)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!("{}x{} vs {}x{}", self.nrows, self.ncols, other.nrows, other.ncols)));
        }
        Ok(())
    }
}

/// Which basis a [`SparseOperator`] is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisTag {
    /// The full `2^spins` computational basis.
    Full { spins: usize },
    /// A symmetry sector, identified by a content fingerprint.
    Sector { fingerprint: u64, dim: usize },
}

impl BasisTag {
    pub fn dim(&self) -> usize {
        match *self {
            BasisTag::Full { spins } => 1usize << spins,
            BasisTag::Sector { dim, .. } => dim,
        }
    }
}

/// A square complex operator on a Hilbert space or one of its sectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    basis: BasisTag,
    matrix: CsrMatrix,
}

impl SparseOperator {
    pub fn new(basis: BasisTag, matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix for a basis of dimension {}", matrix.nrows(), matrix.ncols(), basis.dim())));
        }
        Ok(SparseOperator { basis, matrix })
    }

    pub fn zero(basis: BasisTag) -> Self {
        let n = basis.dim();
        SparseOperator { basis, matrix: CsrMatrix::zeros(n, n) }
    }

    pub fn identity(basis: BasisTag) -> Self {
        SparseOperator { basis, matrix: CsrMatrix::identity(basis.dim()) }
    }

    pub fn diagonal(basis: BasisTag, diag: &[C64]) -> Result<Self> {
        Self::new(basis, CsrMatrix::from_diagonal(diag))
    }

    pub fn basis(&self) -> BasisTag {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.matrix.get(r, c)
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("vector of length {} for dimension {}", x.len(), self.dim())));
        }
        Ok(self.matrix.matvec(x))
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch(format!("{:?} vs {:?}", self.basis, other.basis)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(SparseOperator { basis: self.basis, matrix: self.matrix.add(&other.matrix)? })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        SparseOperator { basis: self.basis, matrix: self.matrix.scale(c) }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    /// Product `self * other` keeping only exact nonzeros.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.mul_with_tol(other, 0.0)
    }

    pub fn mul_with_tol(&self, other: &Self, drop_tol: f64) -> Result<Self> {
        self.check(other)?;
        Ok(SparseOperator { basis: self.basis, matrix: self.matrix.mul(&other.matrix, drop_tol)? })
    }

    pub fn adjoint(&self) -> Self {
        SparseOperator { basis: self.basis, matrix: self.matrix.adjoint() }
    }

    pub fn transpose(&self) -> Self {
        SparseOperator { basis: self.basis, matrix: self.matrix.transpose() }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diagonal().into_iter().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.matrix.is_diagonal()
    }

    pub fn to_dense(&self) -> Array2<C64> {
        self.matrix.to_dense()
    }

    /// Entrywise distance `max |A_ij - B_ij|`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }
}
