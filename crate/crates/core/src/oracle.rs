//! Dense ground truth for small graphs: exact and truncated PPR, the
//! random-walk matrix polynomial, and audits of the sparsifier's error.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::PsneConfig;
use crate::dense::DenseMatrix;
use crate::error::{PsneError, Result};
use crate::factorize::filter;
use crate::graph::Graph;
use crate::mp::mp_apply;
use crate::pattern::PatternWeights;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;
use crate::sparsifier::build_sparsifier;

/// Largest graph for which dense `n × n` matrices are formed.
pub const DENSE_CAP: usize = 5000;

/// Rows audited when the graph exceeds [`DENSE_CAP`].
pub const SAMPLED_ROWS: usize = 64;

fn check_cap(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        return Err(PsneError::DenseCapExceeded { n, cap: DENSE_CAP });
    }
    Ok(())
}

/// `P·X` with `P = D⁻¹A`, using the graph's sparse adjacency.
pub fn transition_times<T: Scalar>(g: &Graph<T>, x: &DenseMatrix<T>) -> DenseMatrix<T> {
    let width = x.cols();
    let mut out = DenseMatrix::zeros(g.n(), width);
    out.as_mut_slice().par_chunks_mut(width.max(1)).enumerate().for_each(|(i, dst)| {
        let inv = g.degree(i).recip();
        for (&h, &w) in g.neighbors(i).iter().zip(g.neighbor_weights(i)) {
            let p = w * inv;
            for (d, &s) in dst.iter_mut().zip(x.row(h as usize)) {
                *d += p * s;
            }
        }
    });
    out
}

/// `Π = Σ_{r≥0} α(1−α)^r P^r`.
///
/// Summation stops once the last term's max-norm, and the per-entry bound
/// on the remaining tail (`max-norm · (1−α)/α`), are both below `tol`, so
/// every row sums to 1 within `n·tol`.
pub fn exact_ppr<T: Scalar>(g: &Graph<T>, alpha: f64, tol: f64) -> Result<DenseMatrix<T>> {
    check_cap(g.n())?;
    check_alpha(alpha, true)?;
    let decay = T::of(1.0 - alpha);
    let mut term = DenseMatrix::identity(g.n()).map(|x| x * T::of(alpha));
    let mut sum = term.clone();
    let tail = T::of(((1.0 - alpha) / alpha).max(1.0));
    let tol = T::of(tol);
    let mut r = 0;
    while term.max_abs() * tail >= tol {
        term = transition_times(g, &term).map(|x| x * decay);
        sum.as_mut_slice().iter_mut().zip(term.as_slice()).for_each(|(s, &t)| *s += t);
        r += 1;
        if r > 1_000_000 {
            return Err(PsneError::InvalidParameter(format!("PPR series did not reach tolerance {}", tol)));
        }
    }
    Ok(sum)
}

/// `Π′ = Σ_{r=0..T} α(1−α)^r P^r`.
pub fn truncated_ppr<T: Scalar>(g: &Graph<T>, alpha: f64, trunc: usize) -> Result<DenseMatrix<T>> {
    check_cap(g.n())?;
    check_alpha(alpha, true)?;
    let decay = T::of(1.0 - alpha);
    let mut term = DenseMatrix::identity(g.n()).map(|x| x * T::of(alpha));
    let mut sum = term.clone();
    for _ in 0..trunc {
        term = transition_times(g, &term).map(|x| x * decay);
        sum.as_mut_slice().iter_mut().zip(term.as_slice()).for_each(|(s, &t)| *s += t);
    }
    Ok(sum)
}

/// Mixing weights `β_r = α(1−α)^r / α_sum` for `r = 1..=T`.
pub fn ppr_beta(alpha: f64, trunc: usize) -> Vec<f64> {
    let masses: Vec<f64> = (1..=trunc).map(|r| alpha * (1.0 - alpha).powi(r as i32)).collect();
    let total: f64 = masses.iter().sum();
    masses.into_iter().map(|m| m / total).collect()
}

/// `L_β(G) = D − Σ_{r=1..T} β_r D (D⁻¹A)^r`.
pub fn polynomial_laplacian<T: Scalar>(g: &Graph<T>, beta: &[f64]) -> Result<DenseMatrix<T>> {
    check_cap(g.n())?;
    let total: f64 = beta.iter().sum();
    if beta.is_empty() || (total - 1.0).abs() > 1e-12 || beta.iter().any(|&b| b < 0.0) {
        return Err(PsneError::InvalidParameter(format!(
            "coefficients must be nonnegative and sum to 1, got sum {total}"
        )));
    }
    let n = g.n();
    let mut power = DenseMatrix::identity(n);
    let mut poly = DenseMatrix::<T>::zeros(n, n);
    for &b in beta {
        power = transition_times(g, &power);
        let b = T::of(b);
        poly.as_mut_slice().iter_mut().zip(power.as_slice()).for_each(|(s, &p)| *s += b * p);
    }
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        let d = g.degree(i);
        let diag = if i == j { d } else { T::zero() };
        diag - d * poly[(i, j)]
    }))
}

/// One row of `Π` by vector iteration, for graphs beyond the dense cap.
pub fn ppr_row<T: Scalar>(g: &Graph<T>, alpha: f64, source: usize, terms: Option<usize>, tol: f64) -> Vec<T> {
    let n = g.n();
    let decay = T::of(1.0 - alpha);
    let mut x = vec![T::zero(); n];
    x[source] = T::of(alpha);
    let mut sum = x.clone();
    let tol = T::of(tol);
    let mut r = 0;
    loop {
        if let Some(t) = terms {
            if r >= t {
                break;
            }
        } else if x.iter().fold(T::zero(), |m, &v| m.max(v.abs())) < tol {
            break;
        }
        let mut next = vec![T::zero(); n];
        for (k, &xk) in x.iter().enumerate() {
            if xk == T::zero() {
                continue;
            }
            let share = xk * decay / g.degree(k);
            for (&j, &w) in g.neighbors(k).iter().zip(g.neighbor_weights(k)) {
                next[j as usize] += share * w;
            }
        }
        sum.iter_mut().zip(&next).for_each(|(s, &t)| *s += t);
        x = next;
        r += 1;
    }
    sum
}

/// Empirical stop-node frequencies of `walks` α-decay walks from `source`.
pub fn monte_carlo_ppr_row<T: Scalar, R: Rng + ?Sized>(
    g: &Graph<T>,
    alpha: f64,
    source: usize,
    walks: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut counts = vec![0usize; g.n()];
    for _ in 0..walks {
        let mut cur = source;
        while rng.random::<f64>() >= alpha {
            cur = g.random_step(cur, rng);
        }
        counts[cur] += 1;
    }
    counts.into_iter().map(|c| c as f64 / walks as f64).collect()
}

fn check_alpha(alpha: f64, allow_one: bool) -> Result<()> {
    let ok = alpha > 0.0 && (alpha < 1.0 || (allow_one && alpha == 1.0));
    if !ok {
        return Err(PsneError::InvalidParameter(format!("alpha {alpha} out of range")));
    }
    Ok(())
}

/// Errors of one approximate PPR matrix against the dense truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    /// `‖Π − Π̃‖_F`
    pub err_exact: f64,
    /// `‖Π′ − Π̃‖_F`
    pub err_truncated: f64,
    /// `‖Π′ − Π̃‖_F / (4·α_sum·√n)`
    pub epsilon_hat: f64,
    /// `‖M_Π − M_Π̃‖_F` with unit pattern weights, before filtering.
    pub err_mp: f64,
    /// `‖σ_μ(M_Π) − σ_μ(M_Π̃)‖_F` with unit pattern weights.
    pub err_mp_filtered: f64,
}

/// Compares `pi_tilde` with the exact and truncated PPR matrices.
pub fn error_metrics<T: Scalar>(
    g: &Graph<T>,
    cfg: &PsneConfig,
    pi: &DenseMatrix<T>,
    pi_trunc: &DenseMatrix<T>,
    pi_tilde: &DenseMatrix<T>,
) -> Result<ErrorMetrics> {
    let n = g.n();
    let err_exact = pi.sub(pi_tilde)?.frobenius_norm().as_f64();
    let err_truncated = pi_trunc.sub(pi_tilde)?.frobenius_norm().as_f64();
    let epsilon_hat = err_truncated / (4.0 * cfg.alpha_sum() * (n as f64).sqrt());
    let wp = PatternWeights::uniform(g.m(), T::one());
    let m_exact = mp_apply(&dense_to_sparse(pi), g, &wp)?;
    let m_tilde = mp_apply(&dense_to_sparse(pi_tilde), g, &wp)?;
    let err_mp = m_exact.to_dense().sub(&m_tilde.to_dense())?.frobenius_norm().as_f64();
    let f_exact = filter(&m_exact, cfg.mu, n).to_dense();
    let f_tilde = filter(&m_tilde, cfg.mu, n).to_dense();
    let err_mp_filtered = f_exact.sub(&f_tilde)?.frobenius_norm().as_f64();
    Ok(ErrorMetrics { err_exact, err_truncated, epsilon_hat, err_mp, err_mp_filtered })
}

fn dense_to_sparse<T: Scalar>(d: &DenseMatrix<T>) -> SparseMatrix<T> {
    let rows = (0..d.rows())
        .map(|i| d.row(i).iter().enumerate().filter(|(_, &v)| v != T::zero()).map(|(j, &v)| (j as u32, v)).collect())
        .collect();
    SparseMatrix::from_sorted_rows(d.cols(), rows)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let k = values.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

#[derive(Debug, Clone)]
pub struct AuditOptions {
    /// Independent sparsifier runs per sample factor.
    pub runs: usize,
    /// Sample factors `c`, expected in increasing order.
    pub sample_factors: Vec<f64>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { runs: 5, sample_factors: vec![1.0, 4.0, 16.0, 64.0] }
    }
}

/// Median error metrics of the sparsifier at one sample factor.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditLevel {
    pub samples_factor: f64,
    pub median: ErrorMetrics,
}

/// `metric=value` report plus the list of failed hard checks.
#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub entries: Vec<(String, String)>,
    pub levels: Vec<AuditLevel>,
    pub violations: Vec<String>,
}

impl AuditReport {
    fn put(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        writeln!(f, "violations={}", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "violation={v}")?;
        }
        Ok(())
    }
}

/// Audits the sparsifier against dense ground truth.
///
/// Hard checks: the truncation error `‖Π − Π′‖_F ≤ √n(1−α)^{T+1}`, symmetry
/// and zero row sums of every `L̃`, the unit-weight transform bound
/// `‖M_Π − M_Π̃‖_F ≤ √(d_max+1)·‖Π − Π̃‖_F`, and a non-increasing median
/// `ε̂` across the sample factors. Graphs above [`DENSE_CAP`] fall back to
/// estimates from [`SAMPLED_ROWS`] uniformly drawn rows with no hard checks
/// on the estimates.
pub fn audit_bounds<T: Scalar>(g: &Graph<T>, cfg: &PsneConfig, opts: &AuditOptions) -> Result<AuditReport> {
    cfg.validate(None)?;
    if g.n() > DENSE_CAP {
        return audit_sampled(g, cfg, opts);
    }
    let n = g.n();
    let sqrt_n = (n as f64).sqrt();
    let mut report = AuditReport::default();
    report.put("mode", "dense");
    report.put("n", n);
    report.put("m", g.m());
    report.put("alpha", cfg.alpha);
    report.put("trunc", cfg.trunc);
    report.put("alpha_sum", cfg.alpha_sum());

    let pi = exact_ppr(g, cfg.alpha, 1e-13)?;
    let pi_trunc = truncated_ppr(g, cfg.alpha, cfg.trunc)?;
    let trunc_err = pi.sub(&pi_trunc)?.frobenius_norm().as_f64();
    let trunc_bound = sqrt_n * (1.0 - cfg.alpha).powi(cfg.trunc as i32 + 1);
    report.put("truncation_error", trunc_err);
    report.put("truncation_bound", trunc_bound);
    if trunc_err > trunc_bound * (1.0 + 1e-9) {
        report.violations.push(format!("truncation error {trunc_err} exceeds bound {trunc_bound}"));
    }
    let d_max = g.degrees().iter().fold(0.0f64, |m, &d| m.max(d.as_f64()));
    let mp_factor = (d_max + 1.0).sqrt();
    report.put("mp_factor", mp_factor);

    for &c in &opts.sample_factors {
        let mut samples: Vec<ErrorMetrics> = Vec::with_capacity(opts.runs);
        for run in 0..opts.runs {
            let run_cfg = PsneConfig { samples_factor: c, seed: cfg.seed.wrapping_add(run as u64), ..cfg.clone() };
            let out = build_sparsifier(g, &run_cfg)?;
            let tol = T::of(1e-9) * out.sampled_degrees.iter().fold(T::one(), |m, &d| m.max(d));
            if !out.l_tilde.is_symmetric(tol) {
                report.violations.push(format!("c={c} run={run}: sampled Laplacian is not symmetric"));
            }
            if out.l_tilde.row_sums().iter().any(|s| s.abs() > tol) {
                report.violations.push(format!("c={c} run={run}: sampled Laplacian has nonzero row sums"));
            }
            let metrics = error_metrics(g, &run_cfg, &pi, &pi_trunc, &out.pi_tilde.to_dense())?;
            if metrics.err_mp > mp_factor * metrics.err_exact * (1.0 + 1e-9) + 1e-12 {
                report.violations.push(format!(
                    "c={c} run={run}: transformed error {} exceeds {} x {}",
                    metrics.err_mp, mp_factor, metrics.err_exact
                ));
            }
            samples.push(metrics);
        }
        let med = |f: fn(&ErrorMetrics) -> f64| median(&mut samples.iter().map(f).collect::<Vec<_>>());
        let level = AuditLevel {
            samples_factor: c,
            median: ErrorMetrics {
                err_exact: med(|m| m.err_exact),
                err_truncated: med(|m| m.err_truncated),
                epsilon_hat: med(|m| m.epsilon_hat),
                err_mp: med(|m| m.err_mp),
                err_mp_filtered: med(|m| m.err_mp_filtered),
            },
        };
        let key = |name: &str| format!("c{c}.{name}");
        report.put(key("median_err_exact"), level.median.err_exact);
        report.put(key("median_err_truncated"), level.median.err_truncated);
        report.put(key("median_epsilon_hat"), level.median.epsilon_hat);
        report.put(key("median_err_mp"), level.median.err_mp);
        report.put(key("median_err_mp_filtered"), level.median.err_mp_filtered);
        report
            .put(key("mp_filtered_within_factor"), level.median.err_mp_filtered <= mp_factor * level.median.err_exact);
        report.levels.push(level);
    }
    for pair in report.levels.windows(2) {
        if pair[1].median.epsilon_hat > pair[0].median.epsilon_hat {
            report.violations.push(format!(
                "median epsilon_hat rose from {} (c={}) to {} (c={})",
                pair[0].median.epsilon_hat, pair[0].samples_factor, pair[1].median.epsilon_hat, pair[1].samples_factor
            ));
        }
    }
    Ok(report)
}

fn audit_sampled<T: Scalar>(g: &Graph<T>, cfg: &PsneConfig, opts: &AuditOptions) -> Result<AuditReport> {
    let n = g.n();
    let mut report = AuditReport::default();
    report.put("mode", "sampled_rows");
    report.put("n", n);
    report.put("m", g.m());
    report.put("rows", SAMPLED_ROWS);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let rows: Vec<usize> = (0..SAMPLED_ROWS).map(|_| rng.random_range(0..n)).collect();
    let exact: Vec<Vec<T>> = rows.par_iter().map(|&i| ppr_row(g, cfg.alpha, i, None, 1e-12)).collect();
    let trunc: Vec<Vec<T>> = rows.par_iter().map(|&i| ppr_row(g, cfg.alpha, i, Some(cfg.trunc), 0.0)).collect();
    let scale = n as f64 / SAMPLED_ROWS as f64;
    let row_err = |a: &[T], b: &dyn Fn(usize) -> T| -> f64 {
        a.iter().enumerate().map(|(j, &x)| (x - b(j)).as_f64().powi(2)).sum::<f64>()
    };
    let trunc_sq: f64 = exact.iter().zip(&trunc).map(|(e, t)| row_err(e, &|j| t[j])).sum();
    report.put("truncation_error_estimate", (scale * trunc_sq).sqrt());
    report.put("truncation_bound", (n as f64).sqrt() * (1.0 - cfg.alpha).powi(cfg.trunc as i32 + 1));
    for &c in &opts.sample_factors {
        let mut eps = Vec::with_capacity(opts.runs);
        let mut errs = Vec::with_capacity(opts.runs);
        for run in 0..opts.runs {
            let run_cfg = PsneConfig { samples_factor: c, seed: cfg.seed.wrapping_add(run as u64), ..cfg.clone() };
            let out = build_sparsifier(g, &run_cfg)?;
            let (mut se, mut st) = (0.0, 0.0);
            for (k, &i) in rows.iter().enumerate() {
                let approx = |j: usize| out.pi_tilde.get(i, j);
                se += row_err(&exact[k], &approx);
                st += row_err(&trunc[k], &approx);
            }
            errs.push((scale * se).sqrt());
            eps.push((scale * st).sqrt() / (4.0 * cfg.alpha_sum() * (n as f64).sqrt()));
        }
        report.put(format!("c{c}.median_err_exact_estimate"), median(&mut errs));
        report.put(format!("c{c}.median_epsilon_hat_estimate"), median(&mut eps));
    }
    Ok(report)
}
