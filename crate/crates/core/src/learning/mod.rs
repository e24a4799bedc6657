//! Scorer training: weighted maximum likelihood against pseudo oracles and
//! credit-aware self-critic policy gradient.

mod casc;
mod mle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use casc::{casc_step, rollout, train_casc, PolicyRollout};
pub use mle::train_mle;

use crate::abstractor::Summary;
use crate::config::Config;
use crate::corpus::DocumentCluster;
use crate::error::{Error, Result};
use crate::extractor::{
    backward, forward, greedy_select, score, sigmoid, ScorerParams, Selection, SentenceFeatures,
    SentenceLogits,
};
use crate::pipeline::Pipeline;
use crate::rouge::RougeVariant;
use crate::supervision::IndexSet;

/// Weighted negative log-likelihood of the oracle labelling.
pub fn mle_loss(logits: &SentenceLogits, oracle: &IndexSet, weights: &[f64]) -> f64 {
    assert_eq!(
        logits.len(),
        weights.len(),
        "weights must cover every sentence"
    );
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| -w * logits.log_prob(i, oracle.contains(&i)))
        .sum()
}

/// d(-coef * log p(action_i)) / d(z0, z1).
fn nll_dlogit(logits: &SentenceLogits, i: usize, selected: bool, coef: f64) -> [f64; 2] {
    let [z0, z1] = logits.0[i];
    let p = sigmoid(z1 - z0);
    let y = if selected { 1.0 } else { 0.0 };
    [coef * (y - p), -coef * (y - p)]
}

fn mle_dlogits(logits: &SentenceLogits, oracle: &IndexSet, weights: &[f64]) -> Vec<[f64; 2]> {
    (0..logits.len())
        .map(|i| nll_dlogit(logits, i, oracle.contains(&i), weights[i]))
        .collect()
}

/// Loss and exact parameter gradient of [`mle_loss`] through the scorer.
pub fn mle_grad(
    features: &SentenceFeatures,
    params: &ScorerParams,
    oracle: &IndexSet,
    weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if weights.len() != features.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            actual: weights.len(),
        });
    }
    let (logits, cache) = forward(features, params)?;
    let loss = mle_loss(&logits, oracle, weights);
    let grad = backward(
        features,
        params,
        &cache,
        &mle_dlogits(&logits, oracle, weights),
    );
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CreditMode {
    /// Every arm receives the advantage (plain self-critic).
    All,
    /// Arms where the sampled and greedy selections disagree.
    #[default]
    Distinct,
    /// Arms selected by both policies.
    Intersection,
}

impl FromStr for CreditMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(CreditMode::All),
            "distinct" => Ok(CreditMode::Distinct),
            "intersection" => Ok(CreditMode::Intersection),
            _ => Err(Error::Config(format!(
                "unknown credit mode `{s}` (expected all, distinct or intersection)"
            ))),
        }
    }
}

impl fmt::Display for CreditMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CreditMode::All => "all",
            CreditMode::Distinct => "distinct",
            CreditMode::Intersection => "intersection",
        })
    }
}

/// Arms that receive the advantage, out of `n` arms.
pub fn credit_mask(sampled: &IndexSet, greedy: &IndexSet, mode: CreditMode, n: usize) -> IndexSet {
    match mode {
        CreditMode::All => (0..n).collect(),
        CreditMode::Distinct => sampled.symmetric_difference(greedy).copied().collect(),
        CreditMode::Intersection => sampled.intersection(greedy).copied().collect(),
    }
}

/// `-a * sum_{i in mask} log p(action_i)` where the action on arm `i` is
/// "select" iff `i` is in the sampled set.
pub fn casc_loss(logits: &SentenceLogits, rollout: &PolicyRollout) -> f64 {
    -rollout.advantage
        * crate::extractor::select_log_prob(logits, &rollout.sampled, Some(&rollout.credit_mask))
}

fn casc_dlogits(logits: &SentenceLogits, rollout: &PolicyRollout) -> Vec<[f64; 2]> {
    let mut d = vec![[0.0; 2]; logits.len()];
    if rollout.advantage == 0.0 {
        return d;
    }
    for &i in rollout.credit_mask.iter().filter(|&&i| i < logits.len()) {
        d[i] = nll_dlogit(logits, i, rollout.sampled.contains(&i), rollout.advantage);
    }
    d
}

/// Loss and exact parameter gradient of [`casc_loss`], holding the rollout
/// (sets, advantage, mask) fixed.
pub fn casc_grad(
    features: &SentenceFeatures,
    params: &ScorerParams,
    rollout: &PolicyRollout,
) -> Result<(f64, Vec<f64>)> {
    let (logits, cache) = forward(features, params)?;
    let loss = casc_loss(&logits, rollout);
    let grad = backward(features, params, &cache, &casc_dlogits(&logits, rollout));
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// Plain gradient descent, or Adam with the usual defaults.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        Optimizer {
            kind,
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - Self::BETA1.powi(self.t);
                let c2 = 1.0 - Self::BETA2.powi(self.t);
                for (k, (p, g)) in params.iter_mut().zip(grad).enumerate() {
                    self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * g;
                    self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * g * g;
                    *p -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// POR exponent used when supervision is built for this run.
    pub gamma: f64,
    pub por_enabled: bool,
    pub sr_enabled: bool,
    pub credit_mode: CreditMode,
    pub seed: u64,
    /// Clusters per parameter update.
    pub batch: usize,
    pub optimizer: OptimizerKind,
    /// Start self-critic training from fresh parameters instead of a checkpoint.
    pub cold_start: bool,
    /// Abort instead of skipping a cluster when its abstractor call fails.
    pub abort_on_abstractor_error: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            epochs: 10,
            gamma: 10.0,
            por_enabled: true,
            sr_enabled: false,
            credit_mode: CreditMode::Distinct,
            seed: 0,
            batch: 1,
            optimizer: OptimizerKind::Sgd,
            cold_start: false,
            abort_on_abstractor_error: false,
        }
    }
}

impl TrainConfig {
    /// Keys under `prefix` (`train` or `casc`), with the seed from `seed` or
    /// `REFLECT_SEED`.
    pub fn from_config(cfg: &Config, prefix: &str) -> Result<Self> {
        let d = Self::default();
        let key = |k: &str| format!("{prefix}.{k}");
        let optimizer = match cfg.str(&key("optimizer"))? {
            None | Some("sgd") => OptimizerKind::Sgd,
            Some("adam") => OptimizerKind::Adam,
            Some(s) => return Err(Error::Config(format!("unknown optimizer `{s}`"))),
        };
        let credit_mode = match cfg.str(&key("credit_mode"))? {
            Some(s) => s.parse()?,
            None => d.credit_mode,
        };
        let c = TrainConfig {
            learning_rate: cfg.f64(&key("lr"), d.learning_rate)?,
            epochs: cfg.usize(&key("epochs"), d.epochs)?,
            gamma: cfg.f64("por.gamma", d.gamma)?,
            por_enabled: cfg.bool(&key("por"), d.por_enabled)?,
            sr_enabled: cfg.bool(&key("sr"), d.sr_enabled)?,
            credit_mode,
            seed: cfg.seed("seed", d.seed)?,
            batch: cfg.usize(&key("batch"), d.batch)?,
            optimizer,
            cold_start: cfg.bool(&key("cold_start"), d.cold_start)?,
            abort_on_abstractor_error: cfg.bool(
                &key("abort_on_abstractor_error"),
                d.abort_on_abstractor_error,
            )?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(
                "POR gamma must be a non-negative number".into(),
            ));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of the training metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub mean_reward_sample: Option<f64>,
    pub mean_reward_greedy: Option<f64>,
    pub mean_advantage: Option<f64>,
    pub mean_set_size: f64,
    /// Validation ROUGE-1 F1, on the last step of an epoch.
    pub val_rouge1_f1: Option<f64>,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ScorerParams,
    /// 1-based epoch of the returned checkpoint; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_val: Option<f64>,
    pub log: Vec<MetricsRecord>,
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

fn check_finite(step: usize, loss: f64, params: &ScorerParams) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            step,
            detail: format!("loss = {loss}"),
        });
    }
    if !params.is_finite() {
        return Err(Error::NonFinite {
            step,
            detail: "parameters became non-finite after the update".into(),
        });
    }
    Ok(())
}

/// Greedy selection and its test-time summary for one cluster.
pub fn greedy_summary(
    pipeline: &Pipeline,
    cluster: &DocumentCluster,
    params: &ScorerParams,
    sr: bool,
) -> Result<(Selection, Summary)> {
    let features = pipeline.features(cluster, sr, Some(params))?;
    let selection = greedy_select(&score(&features, params)?);
    let summary = pipeline
        .test_abstractor
        .summarize_indices(cluster, &selection.indices, "gen")?;
    Ok((selection, summary))
}

/// Mean ROUGE-1 F1 of abstracted greedy selections against the gold
/// summaries. Clusters whose abstractor call fails are skipped; if every
/// call fails the first failure is returned.
pub fn validation_score(
    pipeline: &Pipeline,
    clusters: &[DocumentCluster],
    params: &ScorerParams,
    sr: bool,
) -> Result<f64> {
    let scores = crate::par::map(clusters, |c| -> Result<f64> {
        let gold = pipeline.gold_sentences(c)?;
        let (_, summary) = greedy_summary(pipeline, c, params, sr)?;
        Ok(pipeline
            .rouge
            .score(RougeVariant::N(1), &summary.sentences, &gold)
            .f1)
    });
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut first_error = None;
    for (s, c) in scores.into_iter().zip(clusters) {
        match s {
            Ok(v) => {
                sum += v;
                n += 1;
            }
            Err(e) if e.is_external() => {
                log::warn!("validation: skipping {}: {e}", c.id);
                first_error.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if n == 0 {
        return Err(first_error.unwrap_or(Error::NoExamples));
    }
    Ok(sum / n as f64)
}

/// Per-epoch feature cache. Without summary referencing features are fixed;
/// with it they are rebuilt from the current parameters (bootstrap references
/// before any update).
fn epoch_features(
    pipeline: &Pipeline,
    clusters: &[DocumentCluster],
    sr: bool,
    params: Option<&ScorerParams>,
) -> Result<Vec<SentenceFeatures>> {
    crate::par::map(clusters, |c| pipeline.features(c, sr, params))
        .into_iter()
        .collect()
}

fn shuffled_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::rng::stream(seed, "shuffle", epoch as u64));
    order
}

/// Tracks the best validation checkpoint; ties keep the earlier epoch.
struct BestCheckpoint {
    params: ScorerParams,
    epoch: usize,
    val: Option<f64>,
}

impl BestCheckpoint {
    fn new(params: &ScorerParams) -> Self {
        BestCheckpoint {
            params: params.clone(),
            epoch: 0,
            val: None,
        }
    }

    fn offer(&mut self, params: &ScorerParams, epoch: usize, val: f64) {
        if self.val.is_none_or(|b| val > b) {
            self.params = params.clone();
            self.epoch = epoch;
            self.val = Some(val);
        }
    }

    fn finish(self, log: Vec<MetricsRecord>) -> TrainOutcome {
        TrainOutcome {
            params: self.params,
            best_epoch: self.epoch,
            best_val: self.val,
            log,
        }
    }
}

/// Write a metrics log as JSON lines.
pub fn write_metrics<W: std::io::Write>(mut out: W, log: &[MetricsRecord]) -> Result<()> {
    for r in log {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}
