//! Anonymous walk encoding, longest common subsequence, and the per-edge
//! pattern-weight table fed by the path sampler.

use crate::error::{PsneError, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

/// First-occurrence encoding of a walk: the first node is 1, and each node
/// not seen before takes the smallest unused integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnonymousTrajectory(Vec<u32>);

impl AnonymousTrajectory {
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Accepts an already-encoded sequence if it is a valid anonymous walk.
    pub fn from_codes(codes: Vec<u32>) -> Result<Self> {
        if codes.is_empty() {
            return Err(PsneError::EmptyWalk);
        }
        let mut max = 0;
        for &c in &codes {
            if c == 0 || c > max + 1 {
                return Err(PsneError::InvalidParameter(format!("{codes:?} is not a first-occurrence encoding")));
            }
            max = max.max(c);
        }
        Ok(AnonymousTrajectory(codes))
    }
}

pub fn anonymize<N: PartialEq + Copy>(walk: &[N]) -> Result<AnonymousTrajectory> {
    if walk.is_empty() {
        return Err(PsneError::EmptyWalk);
    }
    let mut enc = AnonymousEncoder::default();
    let mut codes = Vec::with_capacity(walk.len());
    for &node in walk {
        codes.push(enc.push(node));
    }
    Ok(AnonymousTrajectory(codes))
}

/// Incremental first-occurrence encoder; walks here are short, so a linear
/// scan beats hashing.
#[derive(Debug, Clone)]
pub(crate) struct AnonymousEncoder<N> {
    seen: Vec<N>,
}

impl<N> Default for AnonymousEncoder<N> {
    fn default() -> Self {
        AnonymousEncoder { seen: Vec::new() }
    }
}

impl<N: PartialEq + Copy> AnonymousEncoder<N> {
    pub(crate) fn clear(&mut self) {
        self.seen.clear();
    }

    pub(crate) fn push(&mut self, node: N) -> u32 {
        match self.seen.iter().position(|&s| s == node) {
            Some(pos) => pos as u32 + 1,
            None => {
                self.seen.push(node);
                self.seen.len() as u32
            }
        }
    }
}

/// Length of the longest common subsequence of `a` and `b`.
pub fn lcss<E: PartialEq>(a: &[E], b: &[E]) -> usize {
    let mut scratch = Vec::new();
    lcss_with(a, b, &mut scratch)
}

/// [`lcss`] reusing `scratch` as the dynamic-programming row.
pub fn lcss_with<E: PartialEq>(a: &[E], b: &[E], scratch: &mut Vec<usize>) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    scratch.clear();
    scratch.resize(b.len() + 1, 0);
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = scratch[j + 1];
            scratch[j + 1] = if x == y { diag + 1 } else { up.max(scratch[j]) };
            diag = up;
        }
    }
    scratch[b.len()]
}

/// Symmetric similarity of two trajectories: `lcss / max(|a|, |b|)`.
pub fn similarity<T: Scalar>(a: &[u32], b: &[u32], scratch: &mut Vec<usize>) -> T {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return T::zero();
    }
    T::of_usize(lcss_with(a, b, scratch)) / T::of_usize(longest)
}

/// Running per-edge sums of trajectory similarity samples.
#[derive(Debug, Clone)]
pub struct PatternTable<T> {
    sums: Vec<T>,
    counts: Vec<u32>,
    s_cap: u32,
    scratch: Vec<usize>,
}

impl<T: Scalar> PatternTable<T> {
    pub fn new(m: usize, s_cap: u32) -> Self {
        PatternTable { sums: vec![T::zero(); m], counts: vec![0; m], s_cap, scratch: Vec::new() }
    }

    pub fn s_cap(&self) -> u32 {
        self.s_cap
    }

    pub fn count(&self, edge: usize) -> u32 {
        self.counts[edge]
    }

    pub fn sum(&self, edge: usize) -> T {
        self.sums[edge]
    }

    /// Records one trajectory pair for the original edge `{i, j}`.
    pub fn record_pair(
        &mut self,
        g: &Graph<T>,
        i: usize,
        j: usize,
        a: &AnonymousTrajectory,
        b: &AnonymousTrajectory,
    ) -> Result<()> {
        let edge = g.edge_id(i, j).ok_or(PsneError::UnknownEdge(i, j))?;
        self.record_edge(edge, a.as_slice(), b.as_slice());
        Ok(())
    }

    #[inline]
    pub(crate) fn wants(&self, edge: usize) -> bool {
        self.counts[edge] < self.s_cap
    }

    #[inline]
    pub(crate) fn record_edge(&mut self, edge: usize, a: &[u32], b: &[u32]) {
        if self.counts[edge] >= self.s_cap {
            return;
        }
        let score: T = similarity(a, b, &mut self.scratch);
        self.sums[edge] += score;
        self.counts[edge] += 1;
    }

    /// Folds another worker's table into this one. When the combined count
    /// would exceed the cap, only as many of `other`'s samples are kept as
    /// fit, each valued at `other`'s mean.
    pub fn merge(&mut self, other: &PatternTable<T>) {
        for e in 0..self.sums.len() {
            let have = self.counts[e];
            let extra = other.counts[e];
            if extra == 0 || have >= self.s_cap {
                continue;
            }
            let take = extra.min(self.s_cap - have);
            if take == extra {
                self.sums[e] += other.sums[e];
            } else {
                self.sums[e] += other.sums[e] * T::of(take as f64 / extra as f64);
            }
            self.counts[e] += take;
        }
    }

    /// Mean similarity per edge; edges never sampled get the neutral weight 1.
    pub fn finalize(&self) -> PatternWeights<T> {
        let weights = self
            .sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| if c == 0 { T::one() } else { (s / T::of(c as f64)).max(T::zero()).min(T::one()) })
            .collect();
        PatternWeights { weights }
    }
}

/// Pattern weight `wp` per undirected edge, indexed by edge id.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternWeights<T> {
    weights: Vec<T>,
}

impl<T: Scalar> PatternWeights<T> {
    /// The same weight on every edge.
    pub fn uniform(m: usize, w: T) -> Self {
        PatternWeights { weights: vec![w; m] }
    }

    pub fn from_vec(weights: Vec<T>) -> Self {
        PatternWeights { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn by_edge(&self, edge: usize) -> T {
        self.weights[edge]
    }

    pub fn get(&self, g: &Graph<T>, u: usize, v: usize) -> Option<T> {
        g.edge_id(u, v).map(|e| self.weights[e])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.weights
    }

    /// Debug dump: `u v wp` per edge using original node ids.
    pub fn write<W: std::io::Write>(&self, g: &Graph<T>, mut out: W) -> Result<()> {
        for (e, &w) in self.weights.iter().enumerate() {
            let (u, v, _) = g.edge(e);
            writeln!(out, "{} {} {}", g.original_id(u), g.original_id(v), w)?;
        }
        out.flush()?;
        Ok(())
    }
}
