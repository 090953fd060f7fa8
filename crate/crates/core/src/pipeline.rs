//! End-to-end embedding: sparsify, re-weight, filter, factorize.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::PsneConfig;
use crate::error::{PsneError, Result};
use crate::factorize::{embed, filter, rsvd, EmbeddingMatrix};
use crate::graph::Graph;
use crate::mp::mp_apply;
use crate::pattern::PatternWeights;
use crate::scalar::Scalar;
use crate::sparsifier::build_sparsifier;

/// Stream of the factorization RNG, kept apart from the sampler streams.
const FACTOR_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EmbedOutput<T> {
    pub embedding: EmbeddingMatrix<T>,
    pub pattern_weights: PatternWeights<T>,
    pub singular_values: Vec<T>,
    pub timings: Vec<StageTiming>,
    /// `(name, count)` pairs: samples, discarded samples, and nnz per stage.
    pub stats: Vec<(&'static str, usize)>,
}

impl<T> EmbedOutput<T> {
    /// One `stage=<name> seconds=<s>` line per stage, then `name=count` stats.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for t in &self.timings {
            s.push_str(&format!("stage={} seconds={:.3}\n", t.stage, t.seconds));
        }
        for (k, v) in &self.stats {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }
}

/// Runs the full pipeline on a pool of `cfg.threads` workers.
pub fn embed_graph<T: Scalar>(g: &Graph<T>, cfg: &PsneConfig) -> Result<EmbedOutput<T>> {
    cfg.validate(Some(g.n()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| PsneError::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run(g, cfg))
}

fn run<T: Scalar>(g: &Graph<T>, cfg: &PsneConfig) -> Result<EmbedOutput<T>> {
    let mut timings = Vec::new();
    let mut stats = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &'static str, timings: &mut Vec<StageTiming>| {
        timings.push(StageTiming { stage, seconds: clock.elapsed().as_secs_f64() });
        clock = Instant::now();
    };

    let sparse = build_sparsifier(g, cfg)?;
    stats.push(("samples", sparse.num_samples));
    stats.push(("discarded", sparse.discarded));
    stats.push(("nnz_laplacian", sparse.l_tilde.nnz()));
    stats.push(("nnz_ppr", sparse.pi_tilde.nnz()));
    lap("sparsify", &mut timings);

    let pattern_weights = sparse.pattern_table.finalize();
    let proximity = if cfg.multi_perspective {
        let m = mp_apply(&sparse.pi_tilde, g, &pattern_weights)?;
        stats.push(("nnz_mp", m.nnz()));
        lap("mp", &mut timings);
        m
    } else {
        sparse.pi_tilde
    };

    let filtered = filter(&proximity, cfg.mu, g.n());
    stats.push(("nnz_filtered", filtered.nnz()));
    drop(proximity);
    lap("filter", &mut timings);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(FACTOR_STREAM);
    let factors = rsvd(&filtered, cfg.dim, cfg.oversample, cfg.power_iters, &mut rng)?;
    let vectors = embed(&factors.u, &factors.sigma)?;
    lap("rsvd", &mut timings);

    Ok(EmbedOutput {
        embedding: EmbeddingMatrix::new(g.original_ids().to_vec(), vectors)?,
        pattern_weights,
        singular_values: factors.sigma,
        timings,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_edge_list;

    #[test]
    fn path_graph_smoke() {
        let g: Graph<f64> = load_edge_list("0 1\n1 2".as_bytes()).unwrap();
        let cfg = PsneConfig { dim: 2, ..PsneConfig::default() };
        let out = embed_graph(&g, &cfg).unwrap();
        assert_eq!((out.embedding.n(), out.embedding.dim()), (3, 2));
        assert!(out.embedding.matrix().is_finite());
        assert!(out.summary().contains("stage=rsvd"));
    }

    #[test]
    fn ablation_skips_transform() {
        let g: Graph<f64> = load_edge_list("0 1\n1 2\n2 3\n3 0\n0 2".as_bytes()).unwrap();
        let cfg = PsneConfig { dim: 2, multi_perspective: false, ..PsneConfig::default() };
        let out = embed_graph(&g, &cfg).unwrap();
        assert!(out.timings.iter().all(|t| t.stage != "mp"));
        assert!(out.stats.iter().all(|(k, _)| *k != "nnz_mp"));
    }

    #[test]
    fn dimension_above_node_count_is_rejected() {
        let g: Graph<f64> = load_edge_list("0 1\n1 2".as_bytes()).unwrap();
        let cfg = PsneConfig { dim: 4, ..PsneConfig::default() };
        assert!(embed_graph(&g, &cfg).is_err());
    }
}
