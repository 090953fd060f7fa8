//! Compressed sparse row matrices and a hash-addressed triplet accumulator.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{PsneError, Result};
use crate::scalar::Scalar;

/// Real sparse matrix in CSR form. Column indices are strictly increasing
/// within each row and no coordinate is stored twice.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix { n_rows, n_cols, indptr: vec![0; n_rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![T::one(); n])
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut rows: Vec<Vec<(u32, T)>> = vec![Vec::new(); n_rows];
        for (r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(PsneError::DimensionMismatch(format!("entry ({r}, {c}) outside {n_rows}x{n_cols}")));
            }
            rows[r].push((c as u32, v));
        }
        Ok(Self::from_row_lists(n_cols, rows))
    }

    /// Assembles from per-row `(col, value)` lists in any order.
    pub fn from_row_lists(n_cols: usize, mut rows: Vec<Vec<(u32, T)>>) -> Self {
        rows.par_iter_mut().for_each(|row| {
            row.sort_by_key(|&(c, _)| c);
            let mut out: Vec<(u32, T)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match out.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => out.push((c, v)),
                }
            }
            *row = out;
        });
        Self::from_sorted_rows(n_cols, rows)
    }

    /// Rows must already be sorted by column without duplicates.
    pub(crate) fn from_sorted_rows(n_cols: usize, rows: Vec<Vec<(u32, T)>>) -> Self {
        let n_rows = rows.len();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        indptr.push(0);
        for row in &rows {
            indptr.push(indptr.last().unwrap() + row.len());
        }
        let nnz = indptr[n_rows];
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
        }
        SparseMatrix { n_rows, n_cols, indptr, indices, values }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(pos) => vals[pos],
            Err(_) => T::zero(),
        }
    }

    /// `(row, col, value)` for every stored entry in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&c, &v)| (i, c as usize, v))
        })
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().copied().sum()).collect()
    }

    /// Applies `f` to every stored value and drops entries mapped to zero.
    pub fn map_nonzero<F>(&self, f: F) -> Self
    where
        F: Fn(T) -> T + Sync,
    {
        let rows: Vec<Vec<(u32, T)>> = (0..self.n_rows)
            .into_par_iter()
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .filter_map(|(&c, &v)| {
                        let y = f(v);
                        (y != T::zero()).then_some((c, y))
                    })
                    .collect()
            })
            .collect();
        Self::from_sorted_rows(self.n_cols, rows)
    }

    /// Drops stored entries with `|x| < threshold`.
    pub fn prune(&self, threshold: T) -> Self {
        self.map_nonzero(|x| if x.abs() < threshold { T::zero() } else { x })
    }

    pub fn scale(&self, a: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.check_same_shape(other)?;
        let triplets = self.iter().map(|(i, j, v)| (i, j, a * v)).chain(other.iter().map(|(i, j, v)| (i, j, b * v)));
        Self::from_triplets(self.n_rows, self.n_cols, triplets)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut cursor = counts;
        let mut indices = vec![0u32; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = cursor[c as usize];
                indices[slot] = i as u32;
                values[slot] = v;
                cursor[c as usize] += 1;
            }
        }
        SparseMatrix { n_rows: self.n_cols, n_cols: self.n_rows, indptr, indices, values }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            out[(i, j)] += v;
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.n_rows == self.n_cols && self.iter().all(|(i, j, v)| (self.get(j, i) - v).abs() <= tol)
    }

    /// Sparse times dense, parallel over output rows.
    pub fn mul_dense(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if x.rows() != self.n_cols {
            return Err(PsneError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.n_rows,
                self.n_cols,
                x.rows(),
                x.cols()
            )));
        }
        let width = x.cols();
        let mut out = DenseMatrix::zeros(self.n_rows, width);
        out.as_mut_slice().par_chunks_mut(width.max(1)).enumerate().for_each(|(i, dst)| {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                for (d, &s) in dst.iter_mut().zip(x.row(c as usize)) {
                    *d += v * s;
                }
            }
        });
        Ok(out)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(PsneError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        Ok(())
    }

    /// Debug dump: one `row col value` line per stored entry.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, j, v) in self.iter() {
            writeln!(out, "{i} {j} {v:e}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Accumulates weights on unordered node pairs.
#[derive(Debug, Clone, Default)]
pub struct PairAccumulator<T> {
    weights: HashMap<u64, T>,
}

#[inline]
fn pair_key(u: usize, v: usize) -> u64 {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    ((a as u64) << 32) | b as u64
}

impl<T: Scalar> PairAccumulator<T> {
    pub fn new() -> Self {
        PairAccumulator { weights: HashMap::new() }
    }

    #[inline]
    pub fn add(&mut self, u: usize, v: usize, w: T) {
        *self.weights.entry(pair_key(u, v)).or_insert_with(T::zero) += w;
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Adds every pair of `other` into `self`.
    pub fn merge(&mut self, other: PairAccumulator<T>) {
        if self.weights.is_empty() {
            self.weights = other.weights;
            return;
        }
        for (k, w) in other.weights {
            *self.weights.entry(k).or_insert_with(T::zero) += w;
        }
    }

    /// Unordered pairs `(u, v, w)` with `u < v`, sorted.
    pub fn into_pairs(self) -> Vec<(usize, usize, T)> {
        let mut pairs: Vec<(u64, T)> = self.weights.into_iter().collect();
        pairs.sort_unstable_by_key(|&(k, _)| k);
        pairs.into_iter().map(|(k, w)| ((k >> 32) as usize, (k & 0xffff_ffff) as usize, w)).collect()
    }
}
