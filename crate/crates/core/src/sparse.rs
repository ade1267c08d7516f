//! Compressed sparse row storage.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square or rectangular sparse matrix in CSR layout with sorted, unique
/// column indices per row.
///
/// Explicit zeros are legal and are never dropped: the limiters read the
/// sparsity pattern, not only the numerically nonzero entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(i, j, v) in triplets {
            assert!(j < ncols, "column {j} out of range");
            let k = next[i];
            cols[k] = j;
            vals[k] = v;
            next[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|&(j, _)| j);
            for &(j, v) in &scratch {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    let last = values.last_mut().unwrap();
                    *last = *last + v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds from per-row sorted `(col, value)` lists.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        Self::from_rows(ncols, rows)
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

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.row_range(i).map(move |k| (self.col_idx[k], self.values[k]))
    }

    /// Position of entry `(i, j)` in the value array, if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_idx[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| r.start + k)
    }

    /// Value at `(i, j)`; zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.position(i, j).map_or(T::zero(), |k| self.values[k])
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.position(i, j).is_some()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                self.row_range(i)
                    .fold(T::zero(), |acc, k| acc + self.values[k] * x[self.col_idx[k]])
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<(usize, T)>> {
        (0..self.nrows).map(|i| self.row(i).collect()).collect()
    }

    /// Same pattern, values transformed entry by entry.
    pub fn map_values<U: Scalar>(&self, mut f: impl FnMut(usize, usize, T) -> U) -> CsrMatrix<U> {
        let mut values = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for k in self.row_range(i) {
                values.push(f(i, self.col_idx[k], self.values[k]));
            }
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }

    pub fn same_pattern<U>(&self, other: &CsrMatrix<U>) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// `self + other`; the result pattern is the union of both patterns.
    pub fn add(&self, other: &CsrMatrix<T>) -> CsrMatrix<T> {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        if self.same_pattern(other) {
            let mut out = self.clone();
            for (a, &b) in out.values.iter_mut().zip(&other.values) {
                *a = *a + b;
            }
            return out;
        }
        let rows = (0..self.nrows)
            .map(|i| {
                let mut merged: BTreeMap<usize, T> = self.row(i).collect();
                for (j, v) in other.row(i) {
                    let e = merged.entry(j).or_insert_with(T::zero);
                    *e = *e + v;
                }
                merged.into_iter().collect()
            })
            .collect();
        CsrMatrix::from_rows(self.ncols, rows)
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| self.row(i).all(|(j, _)| self.contains(j, i)))
    }

    /// Inserts explicit zeros so that `(i, j)` is stored iff `(j, i)` is.
    pub fn symmetrize_pattern(&self) -> CsrMatrix<T> {
        assert_eq!(self.nrows, self.ncols);
        if self.is_structurally_symmetric() {
            return self.clone();
        }
        let mut rows: Vec<BTreeMap<usize, T>> =
            (0..self.nrows).map(|i| self.row(i).collect()).collect();
        for i in 0..self.nrows {
            for (j, _) in self.row(i) {
                rows[j].entry(i).or_insert_with(T::zero);
            }
        }
        CsrMatrix::from_rows(self.ncols, rows.into_iter().map(|r| r.into_iter().collect()).collect())
    }

    /// For each stored position `(i, j)` the position of `(j, i)`.
    ///
    /// Fails if the pattern is not structurally symmetric.
    pub fn transpose_positions(&self) -> Result<Vec<usize>> {
        if self.nrows != self.ncols {
            return Err(Error::NotSquare {
                rows: self.nrows,
                cols: self.ncols,
            });
        }
        let mut out = vec![0; self.nnz()];
        // Walking rows in order visits the entries of each column in row order,
        // which is exactly the order of that column's row in a symmetric pattern.
        let mut cursor: Vec<usize> = self.row_ptr[..self.nrows].to_vec();
        for i in 0..self.nrows {
            for k in self.row_range(i) {
                let j = self.col_idx[k];
                let kt = cursor[j];
                if kt >= self.row_ptr[j + 1] || self.col_idx[kt] != i {
                    return Err(Error::NonSymmetricPattern);
                }
                out[k] = kt;
                cursor[j] += 1;
            }
        }
        Ok(out)
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix<T> {
        let mut new_index = vec![usize::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            new_index[old] = new;
        }
        let rows = keep
            .iter()
            .map(|&i| {
                let mut row: Vec<(usize, T)> = self
                    .row(i)
                    .filter(|&(j, _)| new_index[j] != usize::MAX)
                    .map(|(j, v)| (new_index[j], v))
                    .collect();
                row.sort_by_key(|&(j, _)| j);
                row
            })
            .collect();
        CsrMatrix::from_rows(keep.len(), rows)
    }

    pub fn cast<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        self.map_values(|_, _, v| f(v))
    }
}

/// Square matrix together with its right-hand side.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
}

impl<T: Scalar> SparseSystem<T> {
    pub fn new(matrix: CsrMatrix<T>, rhs: Vec<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if rhs.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: rhs.len(),
            });
        }
        Ok(Self { matrix, rhs })
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }
}
