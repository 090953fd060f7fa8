//! Log filtering, randomized SVD, and the embedding matrix it produces.

use std::io::{BufRead, Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dense::DenseMatrix;
use crate::error::{PsneError, Result};
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

/// `max(0, log(x·n·μ))` on every stored entry; nonpositive entries map to 0
/// and zeros are dropped, so implicit zeros stay zero.
pub fn filter<T: Scalar>(m: &SparseMatrix<T>, mu: f64, n: usize) -> SparseMatrix<T> {
    let scale = T::of(mu * n as f64);
    m.map_nonzero(|x| if x <= T::zero() { T::zero() } else { (x * scale).ln().max(T::zero()) })
}

/// Rank-`k` factors `M ≈ U·diag(sigma)·Vᵀ`.
#[derive(Debug, Clone)]
pub struct RsvdResult<T> {
    pub u: DenseMatrix<T>,
    pub sigma: Vec<T>,
    pub v: DenseMatrix<T>,
}

/// Randomized SVD: Gaussian sketch of width `k + oversample`, `power_iters`
/// rounds of subspace iteration with QR after every half step, then an exact
/// SVD of the small projected matrix.
pub fn rsvd<T: Scalar, R: Rng + ?Sized>(
    m: &SparseMatrix<T>,
    k: usize,
    oversample: usize,
    power_iters: usize,
    rng: &mut R,
) -> Result<RsvdResult<T>> {
    let (rows, cols) = (m.n_rows(), m.n_cols());
    let full = rows.min(cols);
    if k == 0 || k > full {
        return Err(PsneError::InvalidParameter(format!("rank {k} outside 1..={full}")));
    }
    let width = (k + oversample).min(full);
    let mt = m.transpose();
    let draws: Vec<T> = (0..cols * width).map(|_| T::of(rng.sample::<f64, _>(StandardNormal))).collect();
    let omega = DenseMatrix::from_vec(cols, width, draws)?;

    let mut q = m.mul_dense(&omega)?.qr()?.0;
    for _ in 0..power_iters {
        let z = mt.mul_dense(&q)?.qr()?.0;
        q = m.mul_dense(&z)?.qr()?.0;
    }
    // B = Qᵀ M = (Mᵀ Q)ᵀ = Rᵀ Q₂ᵀ where Mᵀ Q = Q₂ R.
    let (q2, r) = mt.mul_dense(&q)?.qr()?;
    let small = r.transpose().svd();
    let u = q.matmul(&small.u)?.truncate_cols(k);
    let v = q2.matmul(&small.v)?.truncate_cols(k);
    let sigma = small.s[..k].to_vec();
    Ok(RsvdResult { u, sigma, v })
}

/// Dense `n × k` node embedding; row `i` belongs to `ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    ids: Vec<u64>,
    data: DenseMatrix<T>,
}

const BINARY_MAGIC: &[u8; 4] = b"PSNE";

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(ids: Vec<u64>, data: DenseMatrix<T>) -> Result<Self> {
        if ids.len() != data.rows() {
            return Err(PsneError::DimensionMismatch(format!("{} ids for {} embedding rows", ids.len(), data.rows())));
        }
        if !data.is_finite() {
            return Err(PsneError::Data("embedding contains NaN or infinite values".into()));
        }
        Ok(EmbeddingMatrix { ids, data })
    }

    pub fn n(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.data.row(i)
    }

    /// `original_id\tf1\t…\tfk` with nine significant digits per value.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        for (i, id) in self.ids.iter().enumerate() {
            line.clear();
            line.push_str(&id.to_string());
            for &x in self.data.row(i) {
                line.push('\t');
                line.push_str(&format!("{:.8e}", x.as_f64()));
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id_tok = fields.next().unwrap_or("");
            let id = id_tok
                .trim()
                .parse::<u64>()
                .map_err(|_| PsneError::Parse { line: lineno, msg: format!("bad node id `{id_tok}`") })?;
            let before = data.len();
            for tok in fields {
                let x = tok
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| PsneError::Parse { line: lineno, msg: format!("bad value `{tok}`") })?;
                data.push(T::of(x));
            }
            let width = data.len() - before;
            match dim {
                None => dim = Some(width),
                Some(d) if d != width => {
                    return Err(PsneError::Parse { line: lineno, msg: format!("expected {d} values, found {width}") })
                }
                _ => {}
            }
            ids.push(id);
        }
        let dim = dim.ok_or_else(|| PsneError::Data("empty embedding file".into()))?;
        Self::new(ids.clone(), DenseMatrix::from_vec(ids.len(), dim, data)?)
    }

    /// Little-endian: `PSNE`, u64 n, u64 k, then `n·k` f64 values row-major.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.n() as u64).to_le_bytes())?;
        out.write_all(&(self.dim() as u64).to_le_bytes())?;
        for &x in self.data.as_slice() {
            out.write_all(&x.as_f64().to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the binary layout; rows are labelled `0..n` since the format
    /// carries no ids.
    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(PsneError::Data("missing PSNE magic".into()));
        }
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let k = u64::from_le_bytes(word) as usize;
        let mut data = Vec::with_capacity(n * k);
        for _ in 0..n * k {
            input.read_exact(&mut word)?;
            data.push(T::of(f64::from_le_bytes(word)));
        }
        Self::new((0..n as u64).collect(), DenseMatrix::from_vec(n, k, data)?)
    }
}

/// `U·diag(√σ)`.
pub fn embed<T: Scalar>(u: &DenseMatrix<T>, sigma: &[T]) -> Result<DenseMatrix<T>> {
    if u.cols() != sigma.len() {
        return Err(PsneError::DimensionMismatch(format!("{} columns vs {} singular values", u.cols(), sigma.len())));
    }
    if let Some(&bad) = sigma.iter().find(|&&s| s < T::zero() || s.is_nan()) {
        return Err(PsneError::NegativeSingularValue(bad.as_f64()));
    }
    let roots: Vec<T> = sigma.iter().map(|s| s.sqrt()).collect();
    Ok(DenseMatrix::from_fn(u.rows(), u.cols(), |i, j| u[(i, j)] * roots[j]))
}
