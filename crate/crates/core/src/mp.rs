//! Multiple-perspective transform: blends each source node's proximity row
//! with the rows of its one-hop neighbors.

use rayon::prelude::*;

use crate::error::{PsneError, Result};
use crate::graph::Graph;
use crate::pattern::PatternWeights;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

/// Entries below this magnitude are dropped from the transformed matrix.
pub const DROP_TOLERANCE: f64 = 1e-12;

/// `λ_ii = 1/(d_i+1)` per node and `λ_hi = wp_hi/(√(d_h+1)·√(d_i+1))` per
/// adjacency slot of `i`, aligned with [`Graph::neighbors`].
#[derive(Debug, Clone)]
pub struct MpCoefficients<T> {
    self_coef: Vec<T>,
    offsets: Vec<usize>,
    neighbor_coef: Vec<T>,
}

impl<T: Scalar> MpCoefficients<T> {
    pub fn new(g: &Graph<T>, wp: &PatternWeights<T>) -> Result<Self> {
        if wp.len() != g.m() {
            return Err(PsneError::DimensionMismatch(format!("{} pattern weights for {} edges", wp.len(), g.m())));
        }
        let n = g.n();
        let root: Vec<T> = g.degrees().iter().map(|&d| (d + T::one()).sqrt()).collect();
        let self_coef = g.degrees().iter().map(|&d| (d + T::one()).recip()).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbor_coef = Vec::new();
        for i in 0..n {
            for (&h, &e) in g.neighbors(i).iter().zip(g.neighbor_edges(i)) {
                neighbor_coef.push(wp.by_edge(e as usize) / (root[h as usize] * root[i]));
            }
            offsets.push(neighbor_coef.len());
        }
        Ok(MpCoefficients { self_coef, offsets, neighbor_coef })
    }

    #[inline]
    pub fn self_coef(&self, i: usize) -> T {
        self.self_coef[i]
    }

    /// Coefficients `λ_hi` for `h` in `neighbors(i)` order.
    #[inline]
    pub fn neighbor_coefs(&self, i: usize) -> &[T] {
        &self.neighbor_coef[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// `M(i, j) = Σ_{h∈N(i)} λ_hi·S(h, j) + λ_ii·S(i, j)`, evaluated as a gather
/// of `d_i + 1` rows of `S` per output row.
pub fn mp_apply<T: Scalar>(s: &SparseMatrix<T>, g: &Graph<T>, wp: &PatternWeights<T>) -> Result<SparseMatrix<T>> {
    let n = g.n();
    if s.n_rows() != n {
        return Err(PsneError::DimensionMismatch(format!(
            "proximity matrix has {} rows, graph has {n} nodes",
            s.n_rows()
        )));
    }
    let coefs = MpCoefficients::new(g, wp)?;
    let n_cols = s.n_cols();
    let tol = T::of(DROP_TOLERANCE);
    let rows: Vec<Vec<(u32, T)>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![T::zero(); n_cols], vec![false; n_cols], Vec::<u32>::new()),
            |(acc, touched, cols), i| {
                let mut scatter = |h: usize, lambda: T| {
                    let (idx, vals) = s.row(h);
                    for (&c, &v) in idx.iter().zip(vals) {
                        let c_us = c as usize;
                        if !touched[c_us] {
                            touched[c_us] = true;
                            cols.push(c);
                        }
                        acc[c_us] += lambda * v;
                    }
                };
                scatter(i, coefs.self_coef(i));
                for (&h, &lambda) in g.neighbors(i).iter().zip(coefs.neighbor_coefs(i)) {
                    scatter(h as usize, lambda);
                }
                cols.sort_unstable();
                let mut row = Vec::with_capacity(cols.len());
                for &c in cols.iter() {
                    let c_us = c as usize;
                    let v = acc[c_us];
                    if v.abs() >= tol {
                        row.push((c, v));
                    }
                    acc[c_us] = T::zero();
                    touched[c_us] = false;
                }
                cols.clear();
                row
            },
        )
        .collect();
    Ok(SparseMatrix::from_sorted_rows(n_cols, rows))
}
