//! Path-sampling sparsifier of the truncated random-walk matrix polynomial
//! and the sparse approximate PPR matrix assembled from it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::PsneConfig;
use crate::error::Result;
use crate::graph::Graph;
use crate::pattern::{AnonymousEncoder, AnonymousTrajectory, PatternTable};
use crate::scalar::Scalar;
use crate::sparse::{PairAccumulator, SparseMatrix};

/// Draws path lengths `r ∈ [1, T]` with `P(r) ∝ α(1−α)^r`.
#[derive(Debug, Clone)]
pub struct PathLengthSampler {
    cumulative: Vec<f64>,
}

impl PathLengthSampler {
    pub fn new(alpha: f64, trunc: usize) -> Self {
        let masses: Vec<f64> = (1..=trunc).map(|r| alpha * (1.0 - alpha).powi(r as i32)).collect();
        let total: f64 = masses.iter().sum();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = masses
            .iter()
            .map(|m| {
                acc += m / total;
                acc
            })
            .collect();
        *cumulative.last_mut().expect("trunc >= 1") = 1.0;
        PathLengthSampler { cumulative }
    }

    pub fn max_len(&self) -> usize {
        self.cumulative.len()
    }

    /// Exact probability of length `r`.
    pub fn probability(&self, r: usize) -> f64 {
        if r == 0 || r > self.cumulative.len() {
            return 0.0;
        }
        let below = if r == 1 { 0.0 } else { self.cumulative[r - 2] };
        self.cumulative[r - 1] - below
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.cumulative.len() == 1 {
            return 1;
        }
        let x: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1) + 1
    }
}

pub fn sample_path_length<R: Rng + ?Sized>(alpha: f64, trunc: usize, rng: &mut R) -> usize {
    PathLengthSampler::new(alpha, trunc).sample(rng)
}

/// One sampled path of length `r` through a chosen edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample<T> {
    /// Endpoint reached from `u` (the path's first node).
    pub u_prime: usize,
    /// Endpoint reached from `v` (the path's last node).
    pub v_prime: usize,
    /// `Σ 2/A(n_{i−1}, n_i)` over the whole path.
    pub z_p: T,
    /// Anonymous trajectory of the walk started at `u`.
    pub ano_u: AnonymousTrajectory,
    /// Anonymous trajectory of the walk started at `v`.
    pub ano_v: AnonymousTrajectory,
}

/// Samples a length-`r` path in which edge `(u, v)` sits at a uniformly
/// chosen position `j`: `j−1` walk steps extend it from `u`, `r−j` from `v`.
pub fn path_sampling<T: Scalar, R: Rng + ?Sized>(
    g: &Graph<T>,
    u: usize,
    v: usize,
    r: usize,
    rng: &mut R,
) -> PathSample<T> {
    let w_uv = g.weight(u, v).expect("path_sampling needs an edge of the graph");
    let j = rng.random_range(1..=r);
    let mut ano_u = Vec::with_capacity(j);
    let mut ano_v = Vec::with_capacity(r - j + 1);
    let mut enc = AnonymousEncoder::default();
    let (u_prime, z_u) = walk(g, u, j - 1, rng, &mut enc, &mut ano_u);
    enc.clear();
    let (v_prime, z_v) = walk(g, v, r - j, rng, &mut enc, &mut ano_v);
    PathSample {
        u_prime,
        v_prime,
        z_p: T::of(2.0) / w_uv + z_u + z_v,
        ano_u: AnonymousTrajectory::from_codes(ano_u).expect("encoder output is valid"),
        ano_v: AnonymousTrajectory::from_codes(ano_v).expect("encoder output is valid"),
    }
}

/// Walks `steps` steps from `start`, appending anonymous codes (including the
/// start) to `codes`; returns the end node and `Σ 2/A` over the steps taken.
#[inline]
fn walk<T: Scalar, R: Rng + ?Sized>(
    g: &Graph<T>,
    start: usize,
    steps: usize,
    rng: &mut R,
    enc: &mut AnonymousEncoder<usize>,
    codes: &mut Vec<u32>,
) -> (usize, T) {
    let two = T::of(2.0);
    let mut cur = start;
    let mut z = T::zero();
    codes.push(enc.push(cur));
    for _ in 0..steps {
        let (next, w) = g.random_step_weighted(cur, rng);
        z += two / w;
        cur = next;
        codes.push(enc.push(cur));
    }
    (cur, z)
}

/// Same walk without trajectory bookkeeping.
#[inline]
fn walk_plain<T: Scalar, R: Rng + ?Sized>(g: &Graph<T>, start: usize, steps: usize, rng: &mut R) -> (usize, T) {
    let two = T::of(2.0);
    let mut cur = start;
    let mut z = T::zero();
    if g.is_unit_weighted() {
        for _ in 0..steps {
            cur = g.random_step(cur, rng);
        }
        return (cur, two * T::of_usize(steps));
    }
    for _ in 0..steps {
        let (next, w) = g.random_step_weighted(cur, rng);
        z += two / w;
        cur = next;
    }
    (cur, z)
}

/// Result of [`build_sparsifier`].
#[derive(Debug, Clone)]
pub struct SparsifierOutput<T> {
    /// `αI + α_sum(I − D⁻¹L̃)`, with `D` the input graph's degree matrix.
    pub pi_tilde: SparseMatrix<T>,
    /// Laplacian of the sampled graph.
    pub l_tilde: SparseMatrix<T>,
    pub pattern_table: PatternTable<T>,
    pub alpha_sum: T,
    /// Weighted degrees of the sampled graph.
    pub sampled_degrees: Vec<T>,
    pub num_samples: usize,
    /// Samples dropped because both endpoints coincided.
    pub discarded: usize,
}

struct WorkerOutput<T> {
    pairs: PairAccumulator<T>,
    table: PatternTable<T>,
    discarded: usize,
}

/// Runs `N = c·T·m` path samples and assembles `L̃` and `Π̃`.
///
/// The samples are split into `cfg.threads` contiguous chunks, each driven by
/// its own ChaCha stream derived from `(cfg.seed, chunk)` and merged in chunk
/// order, so the output is reproducible for a fixed thread count.
pub fn build_sparsifier<T: Scalar>(g: &Graph<T>, cfg: &PsneConfig) -> Result<SparsifierOutput<T>> {
    cfg.validate(None)?;
    let n = g.n();
    let m = g.m();
    let total = cfg.num_samples(m).max(1);
    let lengths = PathLengthSampler::new(cfg.alpha, cfg.trunc);
    let workers = cfg.threads.min(total);
    let base = total / workers;
    let extra = total % workers;
    let scale = T::of(2.0 * m as f64 / total as f64);

    let outputs: Vec<WorkerOutput<T>> = (0..workers)
        .into_par_iter()
        .map(|w| {
            let count = base + usize::from(w < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(w as u64);
            let mut pairs = PairAccumulator::new();
            let mut table = PatternTable::new(m, cfg.s_cap);
            let mut enc = AnonymousEncoder::default();
            let mut codes_u = Vec::with_capacity(cfg.trunc + 1);
            let mut codes_v = Vec::with_capacity(cfg.trunc + 1);
            let mut discarded = 0;
            for _ in 0..count {
                let edge = rng.random_range(0..m);
                let (u, v, w_uv) = g.edge(edge);
                let r = lengths.sample(&mut rng);
                let j = rng.random_range(1..=r);
                let (u_end, v_end, z) = if table.wants(edge) {
                    codes_u.clear();
                    codes_v.clear();
                    enc.clear();
                    let (a, za) = walk(g, u, j - 1, &mut rng, &mut enc, &mut codes_u);
                    enc.clear();
                    let (b, zb) = walk(g, v, r - j, &mut rng, &mut enc, &mut codes_v);
                    table.record_edge(edge, &codes_u, &codes_v);
                    (a, b, za + zb)
                } else {
                    let (a, za) = walk_plain(g, u, j - 1, &mut rng);
                    let (b, zb) = walk_plain(g, v, r - j, &mut rng);
                    (a, b, za + zb)
                };
                if u_end == v_end {
                    discarded += 1;
                    continue;
                }
                let z_p = z + T::of(2.0) / w_uv;
                pairs.add(u_end, v_end, scale * T::of_usize(r) / z_p);
            }
            WorkerOutput { pairs, table, discarded }
        })
        .collect();

    let mut pairs = PairAccumulator::new();
    let mut table = PatternTable::new(m, cfg.s_cap);
    let mut discarded = 0;
    for out in outputs {
        pairs.merge(out.pairs);
        table.merge(&out.table);
        discarded += out.discarded;
    }
    let pairs = pairs.into_pairs();

    let mut sampled_degrees = vec![T::zero(); n];
    for &(a, b, w) in &pairs {
        sampled_degrees[a] += w;
        sampled_degrees[b] += w;
    }
    let alpha = T::of(cfg.alpha);
    let alpha_sum = T::of(cfg.alpha_sum());

    let mut l_rows: Vec<Vec<(u32, T)>> = (0..n).map(|i| vec![(i as u32, sampled_degrees[i])]).collect();
    let mut pi_rows: Vec<Vec<(u32, T)>> =
        (0..n).map(|i| vec![(i as u32, alpha + alpha_sum * (T::one() - sampled_degrees[i] / g.degree(i)))]).collect();
    for &(a, b, w) in &pairs {
        l_rows[a].push((b as u32, -w));
        l_rows[b].push((a as u32, -w));
        pi_rows[a].push((b as u32, alpha_sum * w / g.degree(a)));
        pi_rows[b].push((a as u32, alpha_sum * w / g.degree(b)));
    }
    Ok(SparsifierOutput {
        pi_tilde: SparseMatrix::from_row_lists(n, pi_rows),
        l_tilde: SparseMatrix::from_row_lists(n, l_rows),
        pattern_table: table,
        alpha_sum,
        sampled_degrees,
        num_samples: total,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_edge_list;
    use std::collections::HashMap;

    fn graph(text: &str) -> Graph<f64> {
        load_edge_list(text.as_bytes()).unwrap()
    }

    fn k3() -> Graph<f64> {
        graph("0 1\n1 2\n2 0")
    }

    #[test]
    fn length_distribution_two_terms() {
        let s = PathLengthSampler::new(0.5, 2);
        assert!((s.probability(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.probability(2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.probability(3), 0.0);
    }

    #[test]
    fn length_single_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| sample_path_length(0.3, 1, &mut rng) == 1));
    }

    #[test]
    fn length_frequencies_match_mass_function() {
        let (alpha, trunc) = (0.15, 10);
        let sampler = PathLengthSampler::new(alpha, trunc);
        let total: f64 = (1..=trunc).map(|i| alpha * (1.0 - alpha).powi(i as i32)).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 1_000_000;
        let mut counts = vec![0usize; trunc + 1];
        for _ in 0..draws {
            counts[sampler.sample(&mut rng)] += 1;
        }
        for (r, &count) in counts.iter().enumerate().skip(1) {
            let p = alpha * (1.0 - alpha).powi(r as i32) / total;
            assert!((sampler.probability(r) - p).abs() < 1e-12);
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((count as f64 - draws as f64 * p).abs() < 3.0 * sigma, "r = {r}");
            if r > 1 {
                assert!(sampler.probability(r) < sampler.probability(r - 1));
            }
        }
    }

    #[test]
    fn unit_length_path_is_the_edge() {
        let g = graph("0 1 0.5\n1 2");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = path_sampling(&g, 0, 1, 1, &mut rng);
        assert_eq!((s.u_prime, s.v_prime), (0, 1));
        assert_eq!(s.z_p, 4.0);
        assert_eq!(s.ano_u.as_slice(), &[1]);
        assert_eq!(s.ano_v.as_slice(), &[1]);
    }

    #[test]
    fn unit_weights_give_z_two_r() {
        let g = graph("0 1\n1 2\n2 3\n3 0\n0 2");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for r in 1..=6 {
            let s = path_sampling(&g, 0, 1, r, &mut rng);
            assert_eq!(s.z_p, 2.0 * r as f64);
            assert_eq!(s.ano_u.len() + s.ano_v.len(), r + 1);
        }
    }

    #[test]
    fn k3_endpoint_distribution_matches_enumeration() {
        let g = k3();
        // Brute force over (j, walk step) for edge (0, 1), r = 2.
        let mut exact: HashMap<(usize, usize), f64> = HashMap::new();
        for j in 1..=2 {
            if j == 1 {
                for &x in g.neighbors(1) {
                    *exact.entry((0, x as usize)).or_default() += 0.5 * 0.5;
                }
            } else {
                for &x in g.neighbors(0) {
                    *exact.entry((x as usize, 1)).or_default() += 0.5 * 0.5;
                }
            }
        }
        let draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        for _ in 0..draws {
            let s = path_sampling(&g, 0, 1, 2, &mut rng);
            *seen.entry((s.u_prime, s.v_prime)).or_default() += 1;
        }
        assert!(seen.keys().all(|k| exact.contains_key(k)));
        for (k, p) in exact {
            let got = *seen.get(&k).unwrap_or(&0) as f64;
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((got - draws as f64 * p).abs() < 4.0 * sigma, "{k:?}");
        }
    }

    fn small_cfg(c: f64) -> PsneConfig {
        PsneConfig { alpha: 0.5, trunc: 2, samples_factor: c, seed: 17, threads: 1, ..PsneConfig::default() }
    }

    #[test]
    fn laplacian_structure_and_nnz_bound() {
        let g = graph("0 1\n1 2\n2 3\n3 0\n0 2\n3 4");
        let out = build_sparsifier(&g, &small_cfg(50.0)).unwrap();
        let n = g.n();
        assert!(out.l_tilde.is_symmetric(1e-12));
        for s in out.l_tilde.row_sums() {
            assert!(s.abs() < 1e-12 * out.l_tilde.nnz() as f64);
        }
        assert!(out.pi_tilde.nnz() <= 2 * out.num_samples + n);
        for (i, j, v) in out.pi_tilde.iter() {
            if i != j {
                assert!(v >= 0.0);
            }
        }
        let alpha_sum = small_cfg(1.0).alpha_sum();
        let worst = (0..n).map(|i| out.sampled_degrees[i] / g.degree(i) - 1.0).fold(f64::MIN, f64::max);
        for i in 0..n {
            let diag = out.pi_tilde.get(i, i);
            let expected = 0.5 + alpha_sum * (1.0 - out.sampled_degrees[i] / g.degree(i));
            assert!((diag - expected).abs() < 1e-12);
            assert!(diag >= 0.5 - alpha_sum * worst - 1e-12);
            assert!((out.l_tilde.get(i, i) - out.sampled_degrees[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed_and_threads() {
        let g = graph("0 1\n1 2\n2 3\n3 0\n0 2\n3 4\n4 5\n5 1");
        for threads in [1, 3] {
            let cfg = PsneConfig { threads, ..small_cfg(20.0) };
            let a = build_sparsifier(&g, &cfg).unwrap();
            let b = build_sparsifier(&g, &cfg).unwrap();
            assert_eq!(a.pi_tilde, b.pi_tilde);
            assert_eq!(a.pattern_table.finalize(), b.pattern_table.finalize());
        }
    }

    #[test]
    fn pattern_table_is_filled_and_capped() {
        let g = graph("0 1\n1 2\n2 3\n3 0");
        let cfg = PsneConfig { s_cap: 4, ..small_cfg(30.0) };
        let out = build_sparsifier(&g, &cfg).unwrap();
        for e in 0..g.m() {
            assert_eq!(out.pattern_table.count(e), 4);
        }
        for &w in out.pattern_table.finalize().as_slice() {
            assert!((0.0..=1.0).contains(&w));
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g: Graph<f32> = load_edge_list("0 1\n1 2\n2 0\n2 3".as_bytes()).unwrap();
        let out = build_sparsifier(&g, &small_cfg(10.0)).unwrap();
        assert!(out.l_tilde.is_symmetric(1e-6));
    }
}
