//! Multi-label node classification on embeddings: one-vs-all logistic
//! regression, top-t prediction, Micro/Macro-F1 and repeated random splits.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{PsneError, Result};
use crate::factorize::EmbeddingMatrix;
use crate::graph::NodeLabels;
use crate::scalar::Scalar;

/// Embedding rows of labeled nodes paired with their label sets.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    node_ids: Vec<u64>,
    features: Vec<Vec<f64>>,
    labels: Vec<Vec<usize>>,
    n_labels: usize,
}

impl LabeledDataset {
    /// Joins an embedding with a label file; every labeled node must be embedded.
    pub fn new<T: Scalar>(embedding: &EmbeddingMatrix<T>, labels: &NodeLabels) -> Result<Self> {
        let index: std::collections::HashMap<u64, usize> =
            embedding.ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut node_ids = Vec::with_capacity(labels.entries.len());
        let mut features = Vec::with_capacity(labels.entries.len());
        let mut sets = Vec::with_capacity(labels.entries.len());
        for (node, ls) in &labels.entries {
            let row =
                *index.get(node).ok_or_else(|| PsneError::Data(format!("labeled node {node} has no embedding")))?;
            node_ids.push(*node);
            features.push(embedding.row(row).iter().map(|x| x.as_f64()).collect());
            sets.push(ls.clone());
        }
        Self::from_parts(node_ids, features, sets, labels.n_labels())
    }

    pub fn from_parts(
        node_ids: Vec<u64>,
        features: Vec<Vec<f64>>,
        labels: Vec<Vec<usize>>,
        n_labels: usize,
    ) -> Result<Self> {
        if node_ids.len() != features.len() || features.len() != labels.len() {
            return Err(PsneError::DimensionMismatch("ids, features and labels differ in length".into()));
        }
        if features.is_empty() {
            return Err(PsneError::Data("no labeled nodes".into()));
        }
        if n_labels < 2 {
            return Err(PsneError::Data(format!("need at least 2 distinct labels, got {n_labels}")));
        }
        let dim = features[0].len();
        if features.iter().any(|f| f.len() != dim || f.iter().any(|x| !x.is_finite())) {
            return Err(PsneError::Data("features must be finite and of equal length".into()));
        }
        if labels.iter().flatten().any(|&l| l >= n_labels) {
            return Err(PsneError::Data("label id out of range".into()));
        }
        Ok(LabeledDataset { node_ids, features, labels, n_labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn labels(&self, i: usize) -> &[usize] {
        &self.labels[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    /// Inverse regularization strength in the `C = 1/l2` sense.
    pub l2: f64,
    pub epochs: usize,
    /// Step size; `None` picks the inverse of a smoothness bound.
    pub lr: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { l2: 1.0, epochs: 300, lr: None }
    }
}

/// One binary classifier on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Set when the training split held only positives or only negatives;
    /// the model then predicts the constant prior.
    pub degenerate: bool,
    /// Training loss after every epoch, starting with the initial loss.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvaModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub labels: Vec<LabelModel>,
}

impl OvaModel {
    pub fn degenerate_labels(&self) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, m)| m.degenerate).map(|(i, _)| i).collect()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((&v, &m), &s)| (v - m) / s).collect()
    }

    /// Decision values `w·x + b` per label; degenerate labels give ±∞.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardize(x);
        self.labels.iter().map(|m| m.bias + dot(&m.weights, &z)).collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.scores(x).into_iter().map(sigmoid).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Binary logistic objective `mean logloss + l2/(2n)·‖w‖²` on a fixed design.
#[derive(Debug, Clone)]
pub struct LogisticObjective<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [bool],
    pub l2: f64,
}

impl LogisticObjective<'_> {
    pub fn loss(&self, w: &[f64], b: f64) -> f64 {
        let n = self.x.len() as f64;
        let data: f64 = self
            .x
            .iter()
            .zip(self.y)
            .map(|(xi, &yi)| {
                let z = b + dot(w, xi);
                if yi {
                    softplus(-z)
                } else {
                    softplus(z)
                }
            })
            .sum();
        data / n + self.l2 / (2.0 * n) * dot(w, w)
    }

    /// Gradient with respect to `(w, b)`.
    pub fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let n = self.x.len() as f64;
        let mut gw: Vec<f64> = w.iter().map(|&wi| self.l2 / n * wi).collect();
        let mut gb = 0.0;
        for (xi, &yi) in self.x.iter().zip(self.y) {
            let r = (sigmoid(b + dot(w, xi)) - f64::from(u8::from(yi))) / n;
            gb += r;
            gw.iter_mut().zip(xi).for_each(|(g, &v)| *g += r * v);
        }
        (gw, gb)
    }
}

/// Largest eigenvalue of `(1/n)·[X 1]ᵀ[X 1]` by power iteration.
fn design_spectral_radius(x: &[Vec<f64>]) -> f64 {
    let n = x.len() as f64;
    let d = x[0].len() + 1;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut next = vec![0.0; d];
        for xi in x {
            let proj = v[d - 1] + dot(&v[..d - 1], xi);
            next[..d - 1].iter_mut().zip(xi).for_each(|(o, &a)| *o += proj * a / n);
            next[d - 1] += proj / n;
        }
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let converged = (norm - lambda).abs() <= 1e-10 * norm;
        lambda = norm;
        v = next.into_iter().map(|a| a / norm).collect();
        if converged {
            break;
        }
    }
    lambda
}

fn fit_binary(obj: &LogisticObjective<'_>, epochs: usize, lr: f64) -> LabelModel {
    let d = obj.x[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut prev_w = w.clone();
    let mut prev_b = b;
    let mut momentum_t = 1.0f64;
    let mut loss = obj.loss(&w, b);
    let mut history = Vec::with_capacity(epochs + 1);
    history.push(loss);
    for _ in 0..epochs {
        // Nesterov extrapolation, accepted only when it lowers the loss.
        let next_t = 0.5 * (1.0 + (1.0 + 4.0 * momentum_t * momentum_t).sqrt());
        let beta = (momentum_t - 1.0) / next_t;
        let yw: Vec<f64> = w.iter().zip(&prev_w).map(|(&a, &p)| a + beta * (a - p)).collect();
        let yb = b + beta * (b - prev_b);
        let (gw, gb) = obj.gradient(&yw, yb);
        let cand_w: Vec<f64> = yw.iter().zip(&gw).map(|(&a, &g)| a - lr * g).collect();
        let cand_b = yb - lr * gb;
        let cand_loss = obj.loss(&cand_w, cand_b);
        if cand_loss <= loss {
            prev_w = std::mem::replace(&mut w, cand_w);
            prev_b = std::mem::replace(&mut b, cand_b);
            loss = cand_loss;
            momentum_t = next_t;
        } else {
            // Restart from a plain gradient step, halving the step until the
            // loss does not rise.
            momentum_t = 1.0;
            let (gw, gb) = obj.gradient(&w, b);
            let mut step = lr;
            while step >= 1e-12 {
                let next_w: Vec<f64> = w.iter().zip(&gw).map(|(&a, &g)| a - step * g).collect();
                let next_b = b - step * gb;
                let next_loss = obj.loss(&next_w, next_b);
                if next_loss <= loss {
                    prev_w = std::mem::replace(&mut w, next_w);
                    prev_b = std::mem::replace(&mut b, next_b);
                    loss = next_loss;
                    break;
                }
                step *= 0.5;
            }
            if step < 1e-12 {
                prev_w.clone_from(&w);
                prev_b = b;
            }
        }
        history.push(loss);
    }
    LabelModel { weights: w, bias: b, degenerate: false, loss_history: history }
}

/// Trains one logistic regression per label on the rows in `train`.
pub fn train_ova_logreg(ds: &LabeledDataset, train: &[usize], opts: &TrainOptions) -> Result<OvaModel> {
    if train.is_empty() {
        return Err(PsneError::InvalidParameter("training set is empty".into()));
    }
    if !(opts.l2 >= 0.0) || opts.lr.is_some_and(|lr| !(lr > 0.0)) {
        return Err(PsneError::InvalidParameter("l2 must be >= 0 and lr > 0".into()));
    }
    let d = ds.dim();
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in train {
        mean.iter_mut().zip(ds.features(i)).for_each(|(m, &v)| *m += v / n);
    }
    let mut var = vec![0.0; d];
    for &i in train {
        var.iter_mut().zip(ds.features(i)).zip(&mean).for_each(|((s, &v), &m)| *s += (v - m) * (v - m) / n);
    }
    let scale: Vec<f64> = var.iter().map(|&v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
    let x: Vec<Vec<f64>> = train
        .iter()
        .map(|&i| ds.features(i).iter().zip(&mean).zip(&scale).map(|((&v, &m), &s)| (v - m) / s).collect())
        .collect();
    let lr = opts.lr.unwrap_or_else(|| {
        let smooth = 0.25 * design_spectral_radius(&x) + opts.l2 / n;
        1.0 / smooth.max(1e-12)
    });
    let labels = (0..ds.n_labels())
        .into_par_iter()
        .map(|label| {
            let y: Vec<bool> = train.iter().map(|&i| ds.labels(i).contains(&label)).collect();
            let positives = y.iter().filter(|&&v| v).count();
            if positives == 0 || positives == y.len() {
                let bias = if positives == 0 { f64::NEG_INFINITY } else { f64::INFINITY };
                return LabelModel { weights: vec![0.0; d], bias, degenerate: true, loss_history: vec![0.0] };
            }
            let obj = LogisticObjective { x: &x, y: &y, l2: opts.l2 };
            fit_binary(&obj, opts.epochs, lr)
        })
        .collect();
    Ok(OvaModel { mean, scale, labels })
}

/// Keeps the `count` highest scores, breaking ties toward the lower label id.
pub fn top_labels(scores: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    order.truncate(count);
    order.sort_unstable();
    order
}

/// Predicts as many labels per node as the node truly carries.
pub fn predict_topk(model: &OvaModel, ds: &LabeledDataset, nodes: &[usize]) -> Vec<Vec<usize>> {
    nodes.iter().map(|&i| top_labels(&model.scores(ds.features(i)), ds.labels(i).len())).collect()
}

/// `(micro, macro)` F1 of aligned predicted and true label sets.
pub fn f1_scores(predicted: &[Vec<usize>], truth: &[Vec<usize>], n_labels: usize) -> (f64, f64) {
    let mut tp = vec![0usize; n_labels];
    let mut fp = vec![0usize; n_labels];
    let mut fn_ = vec![0usize; n_labels];
    for (p, t) in predicted.iter().zip(truth) {
        for &l in p {
            if t.contains(&l) {
                tp[l] += 1;
            } else {
                fp[l] += 1;
            }
        }
        for &l in t {
            if !p.contains(&l) {
                fn_[l] += 1;
            }
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let micro = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let macro_ = (0..n_labels).map(|l| f1(tp[l], fp[l], fn_[l])).sum::<f64>() / n_labels.max(1) as f64;
    (micro, macro_)
}

/// Training-set size for a ratio: `floor(ratio·n)`, leaving at least one test node.
pub fn train_size(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64).floor() as usize).clamp(1, n.saturating_sub(1).max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub micro: f64,
    pub macro_: f64,
    pub degenerate_labels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRow {
    pub ratio: f64,
    pub micro_mean: f64,
    pub micro_std: f64,
    pub macro_mean: f64,
    pub macro_std: f64,
    pub trials: Vec<TrialResult>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

/// Runs `trials` uniform random splits per ratio.
///
/// The split of trial `t` at ratio index `r` depends only on `(seed, r, t)`,
/// so two datasets over the same nodes see identical splits.
pub fn run_protocol(
    ds: &LabeledDataset,
    ratios: &[f64],
    trials: usize,
    seed: u64,
    opts: &TrainOptions,
) -> Result<Vec<ProtocolRow>> {
    if let Some(r) = ratios.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
        return Err(PsneError::InvalidParameter(format!("training ratio {r} outside (0, 1)")));
    }
    if trials == 0 {
        return Err(PsneError::InvalidParameter("need at least one trial".into()));
    }
    if ds.len() < 2 {
        return Err(PsneError::Data("need at least two labeled nodes".into()));
    }
    ratios
        .iter()
        .enumerate()
        .map(|(ri, &ratio)| {
            let results = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream((ri * trials + t) as u64);
                    let mut order: Vec<usize> = (0..ds.len()).collect();
                    order.shuffle(&mut rng);
                    let (train, test) = order.split_at(train_size(ratio, ds.len()));
                    let model = train_ova_logreg(ds, train, opts)?;
                    let predicted = predict_topk(&model, ds, test);
                    let truth: Vec<Vec<usize>> = test.iter().map(|&i| ds.labels(i).to_vec()).collect();
                    let (micro, macro_) = f1_scores(&predicted, &truth, ds.n_labels());
                    Ok(TrialResult { micro, macro_, degenerate_labels: model.degenerate_labels().len() })
                })
                .collect::<Result<Vec<_>>>()?;
            let (micro_mean, micro_std) = mean_std(&results.iter().map(|r| r.micro).collect::<Vec<_>>());
            let (macro_mean, macro_std) = mean_std(&results.iter().map(|r| r.macro_).collect::<Vec<_>>());
            Ok(ProtocolRow { ratio, micro_mean, micro_std, macro_mean, macro_std, trials: results })
        })
        .collect()
}

pub fn write_protocol_tsv<W: Write>(rows: &[ProtocolRow], mut out: W) -> Result<()> {
    writeln!(out, "ratio\tmicro_mean\tmicro_std\tmacro_mean\tmacro_std")?;
    for r in rows {
        writeln!(out, "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}", r.ratio, r.micro_mean, r.micro_std, r.macro_mean, r.macro_std)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(features: Vec<Vec<f64>>, labels: Vec<Vec<usize>>, n_labels: usize) -> LabeledDataset {
        let ids = (0..features.len() as u64).collect();
        LabeledDataset::from_parts(ids, features, labels, n_labels).unwrap()
    }

    #[test]
    fn separable_toy_set_is_fit_exactly() {
        let features =
            vec![vec![-2.0, -1.0], vec![-1.5, -2.0], vec![-1.0, -1.2], vec![1.0, 1.5], vec![2.0, 1.0], vec![1.2, 2.2]];
        let labels = vec![vec![0], vec![0], vec![0], vec![1], vec![1], vec![1]];
        let ds = dataset(features, labels, 2);
        let all: Vec<usize> = (0..6).collect();
        let model = train_ova_logreg(&ds, &all, &TrainOptions::default()).unwrap();
        let predicted = predict_topk(&model, &ds, &all);
        for (i, p) in predicted.iter().enumerate() {
            assert_eq!(p, ds.labels(i));
        }
    }

    #[test]
    fn identical_features_recover_prevalence() {
        let n = 40;
        let features = vec![vec![0.7, -3.0, 1.0]; n];
        let labels: Vec<Vec<usize>> = (0..n).map(|i| if i % 4 == 0 { vec![0] } else { vec![1] }).collect();
        let ds = dataset(features, labels, 2);
        let all: Vec<usize> = (0..n).collect();
        let model = train_ova_logreg(&ds, &all, &TrainOptions { epochs: 500, ..TrainOptions::default() }).unwrap();
        let p = model.predict_proba(ds.features(0));
        assert!((p[0] - 0.25).abs() < 1e-3, "{p:?}");
        assert!((p[1] - 0.75).abs() < 1e-3, "{p:?}");
    }

    #[test]
    fn loss_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        use rand::Rng;
        let features: Vec<Vec<f64>> =
            (0..60).map(|_| (0..5).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).collect();
        let labels: Vec<Vec<usize>> = (0..60).map(|i| vec![i % 3]).collect();
        let ds = dataset(features, labels, 3);
        let all: Vec<usize> = (0..60).collect();
        let model = train_ova_logreg(&ds, &all, &TrainOptions::default()).unwrap();
        for m in &model.labels {
            for w in m.loss_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }

    /// Minimizes the objective by Newton's method on `[w, b]`.
    fn newton_optimum(obj: &LogisticObjective<'_>) -> f64 {
        let d = obj.x[0].len();
        let n = obj.x.len() as f64;
        let mut theta = vec![0.0; d + 1];
        for _ in 0..50 {
            let (gw, gb) = obj.gradient(&theta[..d], theta[d]);
            let mut grad = gw;
            grad.push(gb);
            let mut h = nalgebra::DMatrix::<f64>::zeros(d + 1, d + 1);
            for xi in obj.x {
                let p = sigmoid(theta[d] + dot(&theta[..d], xi));
                let mut xa = xi.clone();
                xa.push(1.0);
                for r in 0..=d {
                    for c in 0..=d {
                        h[(r, c)] += p * (1.0 - p) * xa[r] * xa[c] / n;
                    }
                }
            }
            for r in 0..d {
                h[(r, r)] += obj.l2 / n;
            }
            let step = h.lu().solve(&nalgebra::DVector::from_vec(grad)).unwrap();
            theta.iter_mut().zip(step.iter()).for_each(|(t, s)| *t -= s);
        }
        obj.loss(&theta[..d], theta[d])
    }

    #[test]
    fn gradient_descent_reaches_newton_optimum() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, d) = (300, 16);
        let mix: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let common: f64 = rng.random::<f64>() * 2.0 - 1.0;
                (0..d).map(|k| mix[k] * common + 0.3 * (rng.random::<f64>() - 0.5)).collect()
            })
            .collect();
        let labels: Vec<Vec<usize>> =
            features.iter().map(|f| vec![usize::from(f[0] - f[1] + 0.1 * (rng.random::<f64>() - 0.5) > 0.0)]).collect();
        let ds = dataset(features, labels, 2);
        let all: Vec<usize> = (0..n).collect();
        let model = train_ova_logreg(&ds, &all, &TrainOptions::default()).unwrap();
        let x: Vec<Vec<f64>> = (0..n).map(|i| model.standardize(ds.features(i))).collect();
        let y: Vec<bool> = (0..n).map(|i| ds.labels(i).contains(&1)).collect();
        let obj = LogisticObjective { x: &x, y: &y, l2: 1.0 };
        let best = newton_optimum(&obj);
        let reached = *model.labels[1].loss_history.last().unwrap();
        assert!(reached - best < 1e-6 * best, "{reached} vs optimum {best}");
    }

    #[test]
    fn degenerate_label_is_flagged() {
        let features = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let labels = vec![vec![0], vec![0], vec![0, 2], vec![0]];
        let ds = dataset(features, labels, 3);
        let model = train_ova_logreg(&ds, &[0, 1, 3], &TrainOptions::default()).unwrap();
        assert_eq!(model.degenerate_labels(), vec![0, 1, 2]);
        let p = model.predict_proba(ds.features(0));
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(
            seed in 0u64..1000,
            n in 3usize..12,
            d in 1usize..5,
            l2 in 0.0f64..3.0,
        ) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
            let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let w: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
            let b = rng.random::<f64>() - 0.5;
            let obj = LogisticObjective { x: &x, y: &y, l2 };
            let (gw, gb) = obj.gradient(&w, b);
            let h = 1e-5;
            let close = |analytic: f64, numeric: f64| {
                (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(numeric.abs()).max(1e-3)
            };
            for k in 0..d {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[k] += h;
                wm[k] -= h;
                let numeric = (obj.loss(&wp, b) - obj.loss(&wm, b)) / (2.0 * h);
                prop_assert!(close(gw[k], numeric), "w[{}]: {} vs {}", k, gw[k], numeric);
            }
            let numeric = (obj.loss(&w, b + h) - obj.loss(&w, b - h)) / (2.0 * h);
            prop_assert!(close(gb, numeric), "b: {} vs {}", gb, numeric);
        }

        #[test]
        fn topk_invariant_under_monotone_transform(
            scores in prop::collection::vec(-5.0f64..5.0, 1..10),
            count in 0usize..10,
        ) {
            let transformed: Vec<f64> = scores.iter().map(|&s| (s * 0.5).exp() + 3.0).collect();
            prop_assert_eq!(top_labels(&scores, count), top_labels(&transformed, count));
        }

        #[test]
        fn f1_in_unit_interval(
            sets in prop::collection::vec((prop::collection::btree_set(0usize..4, 0..4), prop::collection::btree_set(0usize..4, 0..4)), 1..20),
        ) {
            let predicted: Vec<Vec<usize>> = sets.iter().map(|(p, _)| p.iter().copied().collect()).collect();
            let truth: Vec<Vec<usize>> = sets.iter().map(|(_, t)| t.iter().copied().collect()).collect();
            let (micro, macro_) = f1_scores(&predicted, &truth, 4);
            prop_assert!((0.0..=1.0).contains(&micro));
            prop_assert!((0.0..=1.0).contains(&macro_));
        }

        #[test]
        fn single_label_micro_equals_macro(
            pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..30),
        ) {
            let predicted: Vec<Vec<usize>> = pairs.iter().map(|&(p, _)| if p { vec![0] } else { vec![] }).collect();
            let truth: Vec<Vec<usize>> = pairs.iter().map(|&(_, t)| if t { vec![0] } else { vec![] }).collect();
            let (micro, macro_) = f1_scores(&predicted, &truth, 1);
            prop_assert!((micro - macro_).abs() < 1e-15);
        }
    }

    #[test]
    fn topk_examples() {
        assert_eq!(top_labels(&[0.1, 5.0, 0.3], 1), vec![1]);
        assert_eq!(top_labels(&[2.0, 1.0, 1.0, 1.0], 2), vec![0, 1]);
        assert_eq!(top_labels(&[0.2, 0.9, 0.4], 1), vec![1]);
    }

    #[test]
    fn f1_examples() {
        let truth = vec![vec![0], vec![1, 2]];
        assert_eq!(f1_scores(&truth, &truth, 3), (1.0, 1.0));
        assert_eq!(f1_scores(&[vec![], vec![]], &truth, 3), (0.0, 0.0));
        let truth = vec![vec![0], vec![1]];
        let predicted = vec![vec![0], vec![]];
        let (micro, macro_) = f1_scores(&predicted, &truth, 2);
        assert!((micro - 2.0 / 3.0).abs() < 1e-12);
        assert!((macro_ - 0.5).abs() < 1e-12);
    }

    #[test]
    fn split_sizes() {
        assert_eq!(train_size(0.9, 10), 9);
        assert_eq!(train_size(0.99, 10), 9);
        assert_eq!(train_size(0.5, 3890), 1945);
    }

    #[test]
    fn protocol_is_deterministic_and_validates() {
        let features: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let labels: Vec<Vec<usize>> = (0..20).map(|i| vec![usize::from(i >= 10)]).collect();
        let ds = dataset(features, labels, 2);
        let opts = TrainOptions { epochs: 50, ..TrainOptions::default() };
        let a = run_protocol(&ds, &[0.5], 1, 7, &opts).unwrap();
        let b = run_protocol(&ds, &[0.5], 1, 7, &opts).unwrap();
        assert_eq!(a, b);
        let mut out = Vec::new();
        write_protocol_tsv(&a, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("ratio\tmicro_mean\tmicro_std\tmacro_mean\tmacro_std\n0.5\t"));
        assert!(run_protocol(&ds, &[1.0], 1, 7, &opts).is_err());
        assert!(run_protocol(&ds, &[0.0], 1, 7, &opts).is_err());
    }
}
