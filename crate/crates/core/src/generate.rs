//! Erdős–Rényi and Barabási–Albert synthetic graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PsneError, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

/// G(n, p) with unit weights. Nodes left isolated by the draw are attached
/// to one uniformly chosen other node.
pub fn generate_er<T: Scalar>(n: usize, p: f64, seed: u64) -> Result<Graph<T>> {
    if n < 2 {
        return Err(PsneError::InvalidParameter(format!("ER needs n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(PsneError::InvalidParameter(format!("ER edge probability must be in (0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    if p == 1.0 {
        for v in 1..n {
            for u in 0..v {
                edges.push((u, v));
            }
        }
    } else {
        // Geometric skipping over the lower triangle (Batagelj & Brandes).
        let log_q = (1.0 - p).ln();
        let (mut v, mut w) = (1usize, -1i64);
        while v < n {
            let r: f64 = 1.0 - rng.random::<f64>();
            w += 1 + (r.ln() / log_q).floor() as i64;
            while v < n && w >= v as i64 {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                edges.push((w as usize, v));
            }
        }
    }
    attach_isolated(n, &mut edges, &mut rng);
    Graph::from_edges(n, edges.into_iter().map(|(u, v)| (u, v, T::one())))
}

/// Preferential attachment: starts from a star on `m_attach + 1` nodes; every
/// later node links to `m_attach` distinct existing nodes chosen with
/// probability proportional to degree.
pub fn generate_ba<T: Scalar>(n: usize, m_attach: usize, seed: u64) -> Result<Graph<T>> {
    if m_attach < 1 || m_attach >= n {
        return Err(PsneError::InvalidParameter(format!(
            "BA needs 1 <= m_attach < n, got m_attach = {m_attach}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (1..=m_attach).map(|v| (0, v)).collect();
    // Each node appears once per incident edge endpoint.
    let mut endpoints: Vec<usize> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(m_attach);
    for source in (m_attach + 1)..n {
        chosen.clear();
        while chosen.len() < m_attach {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            edges.push((t, source));
            endpoints.push(t);
            endpoints.push(source);
        }
    }
    Graph::from_edges(n, edges.into_iter().map(|(u, v)| (u, v, T::one())))
}

fn attach_isolated(n: usize, edges: &mut Vec<(usize, usize)>, rng: &mut ChaCha8Rng) {
    let mut touched = vec![false; n];
    for &(u, v) in edges.iter() {
        touched[u] = true;
        touched[v] = true;
    }
    for u in 0..n {
        if !touched[u] {
            let mut v = rng.random_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            edges.push((u.min(v), u.max(v)));
            touched[u] = true;
            touched[v] = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_full_probability_is_complete() {
        let g: Graph<f64> = generate_er(100, 1.0, 3).unwrap();
        assert_eq!(g.m(), 4950);
        assert!(g.degrees().iter().all(|&d| d == 99.0));
    }

    #[test]
    fn er_mean_degree() {
        let n = 10_000;
        let g: Graph<f64> = generate_er(n, 10.0 / n as f64, 11).unwrap();
        let mean = 2.0 * g.m() as f64 / n as f64;
        assert!((mean - 10.0).abs() < 1.0, "mean degree {mean}");
    }

    #[test]
    fn er_sparse_has_no_isolated_nodes() {
        let g: Graph<f64> = generate_er(200, 0.005, 5).unwrap();
        assert_eq!(g.n(), 200);
    }

    #[test]
    fn ba_deterministic() {
        let a: Graph<f64> = generate_ba(50, 2, 42).unwrap();
        let b: Graph<f64> = generate_ba(50, 2, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.m(), 2 + 2 * (50 - 3));
        let c: Graph<f64> = generate_ba(50, 2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_er::<f64>(10, 0.0, 1).is_err());
        assert!(generate_er::<f64>(10, 1.5, 1).is_err());
        assert!(generate_ba::<f64>(5, 5, 1).is_err());
        assert!(generate_ba::<f64>(5, 0, 1).is_err());
    }
}
