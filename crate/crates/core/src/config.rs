use crate::error::{PsneError, Result};

/// Tunables of the embedding pipeline.
///
/// Defaults follow the settings used for the PPI benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct PsneConfig {
    /// PPR decay factor, in (0, 1).
    pub alpha: f64,
    /// Truncation order of the PPR series.
    pub trunc: usize,
    /// Sample-size factor: `N = samples_factor · trunc · m`.
    pub samples_factor: f64,
    /// Filter parameter of `max(0, log(x·n·mu))`.
    pub mu: f64,
    /// Embedding dimension.
    pub dim: usize,
    pub seed: u64,
    pub threads: usize,
    /// Maximum pattern-similarity samples retained per edge.
    pub s_cap: u32,
    pub oversample: usize,
    pub power_iters: usize,
    /// Apply the multiple-perspective transform before filtering.
    pub multi_perspective: bool,
}

impl Default for PsneConfig {
    fn default() -> Self {
        PsneConfig {
            alpha: 0.35,
            trunc: 10,
            samples_factor: 25.0,
            mu: 10.0,
            dim: 128,
            seed: 0,
            threads: 1,
            s_cap: 8,
            oversample: 10,
            power_iters: 4,
            multi_perspective: true,
        }
    }
}

impl PsneConfig {
    /// Checks every field; `n` is the node count of the target graph when known.
    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        let bad = |msg: String| Err(PsneError::InvalidParameter(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if self.trunc < 1 {
            return bad("truncation order must be >= 1".into());
        }
        if !(self.samples_factor >= 1.0) || !self.samples_factor.is_finite() {
            return bad(format!("samples factor must be >= 1, got {}", self.samples_factor));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return bad(format!("mu must be > 0, got {}", self.mu));
        }
        if self.dim < 1 {
            return bad("embedding dimension must be >= 1".into());
        }
        if self.threads < 1 {
            return bad("thread count must be >= 1".into());
        }
        if self.s_cap < 1 {
            return bad("s_cap must be >= 1".into());
        }
        if let Some(n) = n {
            if self.dim > n {
                return bad(format!("embedding dimension {} exceeds node count {n}", self.dim));
            }
        }
        Ok(())
    }

    /// Total number of path samples `N = c·T·m`.
    pub fn num_samples(&self, m: usize) -> usize {
        (self.samples_factor * self.trunc as f64 * m as f64).round() as usize
    }

    /// `Σ_{i=1..T} α(1−α)^i`.
    pub fn alpha_sum(&self) -> f64 {
        alpha_sum(self.alpha, self.trunc)
    }
}

pub fn alpha_sum(alpha: f64, trunc: usize) -> f64 {
    (1..=trunc).map(|i| alpha * (1.0 - alpha).powi(i as i32)).sum()
}
