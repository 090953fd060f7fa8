//! Row-major dense matrices with the handful of factorizations the
//! pipeline needs: Householder QR and one-sided Jacobi SVD.

use std::ops::{Index, IndexMut};

use rayon::prelude::*;

use crate::error::{PsneError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Thin singular value decomposition `A = U·diag(s)·Vᵀ` with `s` sorted in
/// nonincreasing order.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: DenseMatrix<T>,
    pub s: Vec<T>,
    pub v: DenseMatrix<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(PsneError::DimensionMismatch(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Panics on ragged input; intended for literals.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        DenseMatrix { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> T>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Keeps the first `k` columns.
    pub fn truncate_cols(&self, k: usize) -> Self {
        let k = k.min(self.cols);
        Self::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(PsneError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let width = other.cols;
        let mut out = Self::zeros(self.rows, width);
        if width == 0 {
            return Ok(out);
        }
        out.data.par_chunks_mut(width).enumerate().for_each(|(i, dst)| {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != T::zero() {
                    for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                        *d += a * b;
                    }
                }
            }
        });
        Ok(out)
    }

    /// `selfᵀ·other` without materializing the transpose.
    pub fn transpose_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(PsneError::DimensionMismatch(format!(
                "({}x{})ᵀ times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (p, q) = (self.cols, other.cols);
        // Fixed-size row blocks reduced in order keep the sum deterministic.
        let partials: Vec<Vec<T>> = (0..self.rows)
            .collect::<Vec<_>>()
            .par_chunks(256)
            .map(|block| {
                let mut acc = vec![T::zero(); p * q];
                for &r in block {
                    let b = other.row(r);
                    for (i, &ai) in self.row(r).iter().enumerate() {
                        if ai != T::zero() {
                            for (d, &bj) in acc[i * q..(i + 1) * q].iter_mut().zip(b) {
                                *d += ai * bj;
                            }
                        }
                    }
                }
                acc
            })
            .collect();
        let mut partial = vec![T::zero(); p * q];
        for block in partials {
            partial.iter_mut().zip(block).for_each(|(a, b)| *a += b);
        }
        Self::from_vec(p, q, partial)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(PsneError::DimensionMismatch(format!(
                "{}x{} minus {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Ok(DenseMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest deviation of `selfᵀ·self` from the identity.
    pub fn orthonormality_error(&self) -> T {
        let gram = self.transpose_matmul(self).expect("shapes agree");
        let mut worst = T::zero();
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Thin QR by Householder reflections; returns the `rows × cols`
    /// orthonormal factor Q and the `cols × cols` upper-triangular R.
    /// Requires `rows >= cols`.
    pub fn qr(&self) -> Result<(Self, Self)> {
        let (m, n) = (self.rows, self.cols);
        if m < n {
            return Err(PsneError::DimensionMismatch(format!("thin QR of a wide {m}x{n} matrix")));
        }
        // Work column-major: cols[j] is column j.
        let mut cols: Vec<Vec<T>> = (0..n).map(|j| self.column(j)).collect();
        let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);
        let two = T::of(2.0);
        for k in 0..n {
            let x = &cols[k][k..];
            let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
            let mut v: Vec<T> = x.to_vec();
            if norm > T::zero() {
                let alpha = if v[0] >= T::zero() { -norm } else { norm };
                v[0] -= alpha;
            }
            let vnorm2: T = v.iter().map(|&a| a * a).sum();
            if vnorm2 > T::zero() {
                let inv = vnorm2.sqrt().recip();
                v.iter_mut().for_each(|a| *a *= inv);
                cols[k..].par_iter_mut().for_each(|col| {
                    let tail = &mut col[k..];
                    let dot: T = tail.iter().zip(&v).map(|(&a, &b)| a * b).sum();
                    let f = two * dot;
                    tail.iter_mut().zip(&v).for_each(|(a, &b)| *a -= f * b);
                });
            } else {
                v.iter_mut().for_each(|a| *a = T::zero());
            }
            reflectors.push(v);
        }
        let r = Self::from_fn(n, n, |i, j| if i <= j { cols[j][i] } else { T::zero() });
        // Q = H_0 H_1 … H_{n-1} applied to the first n unit vectors.
        let mut qcols: Vec<Vec<T>> = (0..n)
            .map(|j| {
                let mut e = vec![T::zero(); m];
                e[j] = T::one();
                e
            })
            .collect();
        qcols.par_iter_mut().for_each(|col| {
            for k in (0..n).rev() {
                let v = &reflectors[k];
                let tail = &mut col[k..];
                let dot: T = tail.iter().zip(v).map(|(&a, &b)| a * b).sum();
                if dot != T::zero() {
                    let f = two * dot;
                    tail.iter_mut().zip(v).for_each(|(a, &b)| *a -= f * b);
                }
            }
        });
        let q = Self::from_fn(m, n, |i, j| qcols[j][i]);
        Ok((q, r))
    }

    /// Thin SVD by one-sided Jacobi rotations.
    pub fn svd(&self) -> Svd<T> {
        if self.rows < self.cols {
            let t = self.transpose().svd();
            return Svd { u: t.v, s: t.s, v: t.u };
        }
        let (m, n) = (self.rows, self.cols);
        let mut a: Vec<Vec<T>> = (0..n).map(|j| self.column(j)).collect();
        let mut v: Vec<Vec<T>> = (0..n)
            .map(|j| {
                let mut e = vec![T::zero(); n];
                e[j] = T::one();
                e
            })
            .collect();
        let eps = T::epsilon();
        let dot = |x: &[T], y: &[T]| -> T { x.iter().zip(y).map(|(&p, &q)| p * q).sum() };
        for _sweep in 0..80 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let alpha = dot(&a[p], &a[p]);
                    let beta = dot(&a[q], &a[q]);
                    let gamma = dot(&a[p], &a[q]);
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = (T::one() + t * t).sqrt().recip();
                    let s = c * t;
                    let (lo, hi) = a.split_at_mut(q);
                    rotate(&mut lo[p], &mut hi[0], c, s);
                    let (lo, hi) = v.split_at_mut(q);
                    rotate(&mut lo[p], &mut hi[0], c, s);
                }
            }
            if !rotated {
                break;
            }
        }
        let mut s: Vec<T> = a.iter().map(|col| dot(col, col).sqrt()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));
        let scale = s.iter().fold(T::zero(), |x, &y| x.max(y));
        let tiny = scale * eps * T::of_usize(m.max(n));
        let mut ucols: Vec<Vec<T>> = Vec::with_capacity(n);
        let mut vcols: Vec<Vec<T>> = Vec::with_capacity(n);
        let mut svals = Vec::with_capacity(n);
        for &j in &order {
            let sigma = s[j];
            let ucol = if sigma > tiny {
                a[j].iter().map(|&x| x / sigma).collect()
            } else {
                s[j] = T::zero();
                complete_basis(&ucols, m)
            };
            ucols.push(ucol);
            vcols.push(v[j].clone());
            svals.push(s[j]);
        }
        Svd { u: Self::from_fn(m, n, |i, j| ucols[j][i]), s: svals, v: Self::from_fn(n, n, |i, j| vcols[j][i]) }
    }
}

fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// A unit vector orthogonal to every column in `basis`.
fn complete_basis<T: Scalar>(basis: &[Vec<T>], m: usize) -> Vec<T> {
    for seed in 0..m {
        let mut cand = vec![T::zero(); m];
        cand[seed] = T::one();
        for _ in 0..2 {
            for b in basis {
                let d: T = cand.iter().zip(b).map(|(&x, &y)| x * y).sum();
                cand.iter_mut().zip(b).for_each(|(x, &y)| *x -= d * y);
            }
        }
        let norm = cand.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm > T::of(0.5) {
            return cand.into_iter().map(|x| x / norm).collect();
        }
    }
    vec![T::zero(); m]
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}
