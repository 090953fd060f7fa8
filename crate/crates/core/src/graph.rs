//! Undirected weighted graphs in compressed adjacency form.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{PsneError, Result};
use crate::scalar::Scalar;

/// Immutable undirected graph with strictly positive edge weights.
///
/// Nodes are compacted to `0..n`; [`Graph::original_id`] maps back to the
/// ids found in the input. Each adjacency slot also carries the id of the
/// undirected edge it belongs to, so per-edge tables can be addressed from
/// either endpoint.
#[derive(Debug, Clone)]
pub struct Graph<T> {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<T>,
    cumulative: Vec<T>,
    edge_slots: Vec<u32>,
    edges: Vec<(u32, u32, T)>,
    degrees: Vec<T>,
    original_ids: Vec<u64>,
    unit_weights: bool,
}

impl<T: Scalar> Graph<T> {
    /// Builds a graph over `n` nodes labelled `0..n`.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        Self::with_original_ids((0..n as u64).collect(), edges)
    }

    /// Builds a graph whose compact node `i` carries the external id
    /// `original_ids[i]`. Duplicate edges are merged by summing weights.
    pub fn with_original_ids<I>(original_ids: Vec<u64>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let n = original_ids.len();
        let mut merged: HashMap<(u32, u32), T> = HashMap::new();
        for (line, (u, v, w)) in edges.into_iter().enumerate() {
            if u >= n || v >= n {
                return Err(PsneError::InvalidParameter(format!("edge ({u}, {v}) references a node outside 0..{n}")));
            }
            if u == v {
                return Err(PsneError::SelfLoop { line: line + 1, node: original_ids[u] });
            }
            if !(w > T::zero()) || !w.is_finite() {
                return Err(PsneError::NonPositiveWeight { line: line + 1, weight: w.as_f64() });
            }
            let key = (u.min(v) as u32, u.max(v) as u32);
            *merged.entry(key).or_insert_with(T::zero) += w;
        }
        if merged.is_empty() {
            return Err(PsneError::EmptyGraph);
        }
        let mut edges: Vec<(u32, u32, T)> = merged.into_iter().map(|((u, v), w)| (u, v, w)).collect();
        edges.sort_unstable_by_key(|&(u, v, _)| (u, v));

        let mut counts = vec![0usize; n];
        for &(u, v, _) in &edges {
            counts[u as usize] += 1;
            counts[v as usize] += 1;
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(PsneError::IsolatedNode(original_ids[i]));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let slots = offsets[n];
        let mut neighbors = vec![0u32; slots];
        let mut weights = vec![T::zero(); slots];
        let mut edge_slots = vec![0u32; slots];
        let mut cursor = offsets[..n].to_vec();
        for (id, &(u, v, w)) in edges.iter().enumerate() {
            for (a, b) in [(u, v), (v, u)] {
                let slot = cursor[a as usize];
                neighbors[slot] = b;
                weights[slot] = w;
                edge_slots[slot] = id as u32;
                cursor[a as usize] += 1;
            }
        }
        // Neighbor lists come out sorted because edges are sorted by (min, max)
        // and every node receives its lower neighbors before its higher ones.
        let mut degrees = vec![T::zero(); n];
        let mut cumulative = vec![T::zero(); slots];
        for i in 0..n {
            let mut acc = T::zero();
            for s in offsets[i]..offsets[i + 1] {
                acc += weights[s];
                cumulative[s] = acc;
            }
            degrees[i] = acc;
        }
        let unit_weights = weights.iter().all(|&w| w == T::one());
        Ok(Graph { offsets, neighbors, weights, cumulative, edge_slots, edges, degrees, original_ids, unit_weights })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Number of undirected edges, each counted once.
    #[inline]
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn degree(&self, u: usize) -> T {
        self.degrees[u]
    }

    pub fn degrees(&self) -> &[T] {
        &self.degrees
    }

    /// Number of distinct neighbors of `u`.
    #[inline]
    pub fn neighbor_count(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn neighbor_weights(&self, u: usize) -> &[T] {
        &self.weights[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Edge ids aligned with [`Graph::neighbors`].
    #[inline]
    pub fn neighbor_edges(&self, u: usize) -> &[u32] {
        &self.edge_slots[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Undirected edges as `(u, v, weight)` with `u < v`, indexed by edge id.
    pub fn edges(&self) -> &[(u32, u32, T)] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> (usize, usize, T) {
        let (u, v, w) = self.edges[id];
        (u as usize, v as usize, w)
    }

    /// Edge id of the unordered pair `{u, v}`.
    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        if u >= self.n() || v >= self.n() {
            return None;
        }
        let nbrs = self.neighbors(u);
        nbrs.binary_search(&(v as u32)).ok().map(|pos| self.edge_slots[self.offsets[u] + pos] as usize)
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<T> {
        self.edge_id(u, v).map(|id| self.edges[id].2)
    }

    pub fn is_unit_weighted(&self) -> bool {
        self.unit_weights
    }

    pub fn original_id(&self, u: usize) -> u64 {
        self.original_ids[u]
    }

    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    pub fn total_weight(&self) -> T {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// One step of the weighted random walk: moves from `u` to neighbor `v`
    /// with probability `weight(u, v) / d_u`.
    #[inline]
    pub fn random_step<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> usize {
        self.neighbors[self.random_slot(u, rng)] as usize
    }

    /// [`Graph::random_step`] that also reports the weight of the traversed edge.
    #[inline]
    pub fn random_step_weighted<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> (usize, T) {
        let slot = self.random_slot(u, rng);
        (self.neighbors[slot] as usize, self.weights[slot])
    }

    #[inline]
    fn random_slot<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> usize {
        let lo = self.offsets[u];
        let hi = self.offsets[u + 1];
        let count = hi - lo;
        if count == 1 {
            return lo;
        }
        if self.unit_weights {
            return lo + rng.random_range(0..count);
        }
        let target = T::of(rng.random::<f64>()) * self.degrees[u];
        let cum = &self.cumulative[lo..hi];
        lo + cum.partition_point(|&c| c <= target).min(count - 1)
    }

    /// Writes the graph in the edge-list format accepted by [`load_edge_list`],
    /// using original node ids.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for &(u, v, w) in &self.edges {
            writeln!(out, "{} {} {}", self.original_ids[u as usize], self.original_ids[v as usize], w)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Edge set keyed by original ids, sorted; two graphs describe the same
    /// labelled graph exactly when their canonical edges agree.
    pub fn canonical_edges(&self) -> Vec<(u64, u64, T)> {
        let mut out: Vec<(u64, u64, T)> = self
            .edges
            .iter()
            .map(|&(u, v, w)| {
                let a = self.original_ids[u as usize];
                let b = self.original_ids[v as usize];
                (a.min(b), a.max(b), w)
            })
            .collect();
        out.sort_by_key(|&(a, b, _)| (a, b));
        out
    }
}

impl<T: Scalar> PartialEq for Graph<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n() == other.n() && self.canonical_edges() == other.canonical_edges()
    }
}

/// Parses an edge list: one `u v [w]` per line, `#` starts a comment line.
///
/// Node ids are compacted to `0..n` in order of first appearance.
pub fn load_edge_list<T: Scalar, R: BufRead>(reader: R) -> Result<Graph<T>> {
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut original_ids = Vec::new();
    let mut edges = Vec::new();
    let mut compact = |id: u64, ids: &mut Vec<u64>| {
        *index.entry(id).or_insert_with(|| {
            ids.push(id);
            ids.len() - 1
        })
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let parse_id = |tok: Option<&str>| -> Result<u64> {
            let tok = tok.ok_or_else(|| PsneError::Parse { line: lineno, msg: "expected `u v [w]`".into() })?;
            tok.parse::<u64>().map_err(|_| PsneError::Parse { line: lineno, msg: format!("bad node id `{tok}`") })
        };
        let u = parse_id(fields.next())?;
        let v = parse_id(fields.next())?;
        let w = match fields.next() {
            None => 1.0,
            Some(tok) => {
                tok.parse::<f64>().map_err(|_| PsneError::Parse { line: lineno, msg: format!("bad weight `{tok}`") })?
            }
        };
        if fields.next().is_some() {
            return Err(PsneError::Parse { line: lineno, msg: "too many fields".into() });
        }
        if u == v {
            return Err(PsneError::SelfLoop { line: lineno, node: u });
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(PsneError::NonPositiveWeight { line: lineno, weight: w });
        }
        let cu = compact(u, &mut original_ids);
        let cv = compact(v, &mut original_ids);
        edges.push((cu, cv, T::of(w)));
    }
    Graph::with_original_ids(original_ids, edges)
}

/// Per-node label sets read from lines of the form `node label1 label2 …`.
///
/// Label ids are compacted in ascending order of their numeric value.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLabels {
    pub entries: Vec<(u64, Vec<usize>)>,
    pub label_ids: Vec<u64>,
}

impl NodeLabels {
    pub fn n_labels(&self) -> usize {
        self.label_ids.len()
    }
}

pub fn load_labels<R: BufRead>(reader: R) -> Result<NodeLabels> {
    let mut raw: Vec<(u64, Vec<u64>)> = Vec::new();
    let mut seen: HashMap<u64, usize> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut nums = trimmed.split_whitespace().map(|tok| {
            tok.parse::<u64>().map_err(|_| PsneError::Parse { line: lineno, msg: format!("bad id `{tok}`") })
        });
        let node = nums.next().expect("nonempty line")?;
        let labels = nums.collect::<Result<Vec<u64>>>()?;
        match seen.get(&node) {
            Some(&pos) => raw[pos].1.extend(labels),
            None => {
                seen.insert(node, raw.len());
                raw.push((node, labels));
            }
        }
    }
    let mut label_ids: Vec<u64> = raw.iter().flat_map(|(_, ls)| ls.iter().copied()).collect();
    label_ids.sort_unstable();
    label_ids.dedup();
    let entries = raw
        .into_iter()
        .map(|(node, ls)| {
            let mut compact: Vec<usize> =
                ls.iter().map(|l| label_ids.binary_search(l).expect("label collected above")).collect();
            compact.sort_unstable();
            compact.dedup();
            (node, compact)
        })
        .collect();
    Ok(NodeLabels { entries, label_ids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(text: &str) -> Result<Graph<f64>> {
        load_edge_list(text.as_bytes())
    }

    #[test]
    fn path_graph() {
        let g = parse("0 1\n1 2").unwrap();
        assert_eq!((g.n(), g.m()), (3, 2));
        assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn duplicates_merge() {
        let g = parse("0 1\n0 1").unwrap();
        assert_eq!((g.n(), g.m()), (2, 1));
        assert_eq!(g.weight(0, 1), Some(2.0));
        assert_eq!(g.weight(1, 0), Some(2.0));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(parse("0 0"), Err(PsneError::SelfLoop { line: 1, node: 0 })));
        assert!(matches!(parse("0 1\n1 x"), Err(PsneError::Parse { line: 2, .. })));
        assert!(matches!(parse("0 1 -2"), Err(PsneError::NonPositiveWeight { .. })));
        assert!(matches!(parse("0 1 0"), Err(PsneError::NonPositiveWeight { .. })));
        assert!(matches!(parse("0"), Err(PsneError::Parse { .. })));
        assert!(matches!(parse("# nothing\n"), Err(PsneError::EmptyGraph)));
        assert!(matches!(Graph::<f64>::from_edges(3, vec![(0, 1, 1.0)]), Err(PsneError::IsolatedNode(2))));
    }

    #[test]
    fn compaction_keeps_first_appearance() {
        let g = parse("# header\n10 7 2.5\n\n7 3").unwrap();
        assert_eq!(g.original_ids(), &[10, 7, 3]);
        assert_eq!(g.weight(0, 1), Some(2.5));
        assert_eq!(g.edge_id(1, 2), g.edge_id(2, 1));
        assert_eq!(g.edge_id(0, 2), None);
    }

    #[test]
    fn degree_sum_is_twice_weight() {
        let g = parse("0 1 0.5\n1 2 2\n2 0\n2 3 4").unwrap();
        let total: f64 = g.degrees().iter().sum();
        assert!((total - 2.0 * g.total_weight()).abs() < 1e-12);
    }

    #[test]
    fn serialization_roundtrip() {
        let g = parse("5 9 0.25\n9 2\n2 5 3\n2 11").unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let h: Graph<f64> = load_edge_list(buf.as_slice()).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn degree_one_step_is_forced() {
        let g = parse("0 1\n1 2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(g.random_step(0, &mut rng), 1);
        }
    }

    #[test]
    fn weighted_step_frequencies() {
        // Star center 0 with leaf weights 1 and 3.
        let g = parse("0 1 1\n0 2 3").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let hits = (0..draws).filter(|_| g.random_step(0, &mut rng) == 1).count() as f64;
        let p = 0.25;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - draws as f64 * p).abs() < 3.0 * sigma, "hits = {hits}");
    }

    fn chi_square(g: &Graph<f64>, u: usize, draws: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0usize; g.n()];
        for _ in 0..draws {
            counts[g.random_step(u, &mut rng)] += 1;
        }
        g.neighbors(u)
            .iter()
            .zip(g.neighbor_weights(u))
            .map(|(&v, &w)| {
                let expected = draws as f64 * w / g.degree(u);
                (counts[v as usize] as f64 - expected).powi(2) / expected
            })
            .sum()
    }

    #[test]
    fn step_distribution_passes_chi_square() {
        // Upper 0.001 quantiles of chi-square with 1 and 4 degrees of freedom.
        let p3 = parse("0 1\n1 2").unwrap();
        assert!(chi_square(&p3, 1, 100_000, 3) < 10.828);
        let star = parse("0 1 1\n0 2 2\n0 3 3\n0 4 4\n0 5 5\n1 2").unwrap();
        assert!(!star.is_unit_weighted());
        assert!(chi_square(&star, 0, 100_000, 4) < 18.467);
        let hub = parse("0 1\n0 2\n0 3\n0 4\n0 5\n1 2").unwrap();
        assert!(chi_square(&hub, 0, 100_000, 5) < 18.467);
    }

    #[test]
    fn labels_parse_multilabel() {
        let labels = load_labels("1 4 2\n2 2\n# c\n1 9\n".as_bytes()).unwrap();
        assert_eq!(labels.label_ids, vec![2, 4, 9]);
        assert_eq!(labels.entries, vec![(1, vec![0, 1, 2]), (2, vec![0])]);
    }
}
