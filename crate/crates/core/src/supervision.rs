//! Pseudo extraction oracles and relaxed loss weights.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::corpus::{DocumentCluster, TokenizerConfig};
use crate::error::{Error, Result};
use crate::rouge::{rouge_l, rouge_n, RougeConfig, Statistic};

pub type IndexSet = BTreeSet<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMetric {
    /// Mean of ROUGE-1 and ROUGE-2 recall.
    AvgR1R2Recall,
    /// Mean of ROUGE-1 and ROUGE-2 F1.
    AvgR1R2F1,
    /// ROUGE-L recall.
    RlRecall,
}

impl OracleMetric {
    pub fn score(self, candidate: &[String], reference: &[String]) -> f64 {
        match self {
            OracleMetric::AvgR1R2Recall => {
                0.5 * (rouge_n(candidate, reference, 1).recall
                    + rouge_n(candidate, reference, 2).recall)
            }
            OracleMetric::AvgR1R2F1 => {
                0.5 * (rouge_n(candidate, reference, 1).f1 + rouge_n(candidate, reference, 2).f1)
            }
            OracleMetric::RlRecall => rouge_l(candidate, reference).recall,
        }
    }
}

impl FromStr for OracleMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg-r1r2-recall" => Ok(OracleMetric::AvgR1R2Recall),
            "avg-r1r2-f1" => Ok(OracleMetric::AvgR1R2F1),
            "rl-recall" => Ok(OracleMetric::RlRecall),
            _ => Err(Error::Config(format!(
                "unknown oracle metric `{s}` (expected avg-r1r2-recall, avg-r1r2-f1 or rl-recall)"
            ))),
        }
    }
}

impl fmt::Display for OracleMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleMetric::AvgR1R2Recall => "avg-r1r2-recall",
            OracleMetric::AvgR1R2F1 => "avg-r1r2-f1",
            OracleMetric::RlRecall => "rl-recall",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCriterion {
    pub metric: OracleMetric,
    pub min_select: usize,
    pub max_select: Option<usize>,
    pub stop_on_no_gain: bool,
}

impl Default for OracleCriterion {
    fn default() -> Self {
        OracleCriterion {
            metric: OracleMetric::AvgR1R2Recall,
            min_select: 30,
            max_select: None,
            stop_on_no_gain: true,
        }
    }
}

impl OracleCriterion {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let metric = match cfg.str("oracle.metric")? {
            Some(s) => s.parse()?,
            None => d.metric,
        };
        let c = OracleCriterion {
            metric,
            min_select: cfg.usize("oracle.min_select", d.min_select)?,
            max_select: cfg.opt_usize("oracle.max_select")?,
            stop_on_no_gain: cfg.bool("oracle.stop_on_no_gain", d.stop_on_no_gain)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self.max_select {
            Some(0) => Err(Error::Config("oracle.max_select must be positive".into())),
            Some(m) if m < self.min_select => Err(Error::Config(format!(
                "oracle.min_select ({}) exceeds oracle.max_select ({m})",
                self.min_select
            ))),
            _ => Ok(()),
        }
    }
}

/// Tokens of the selected sentences concatenated in document order.
pub fn concat_in_order<'a>(sentences: impl IntoIterator<Item = &'a [String]>) -> Vec<String> {
    sentences
        .into_iter()
        .flat_map(|s| s.iter().cloned())
        .collect()
}

/// Greedy pseudo oracle over tokenized sentences.
///
/// Each step adds the sentence whose addition maximizes the criterion score
/// (ties go to the smaller index). Selection continues while the best
/// addition improves the score, or unconditionally until `min_select`
/// sentences are chosen, and never past `max_select`.
pub fn greedy_oracle(
    sentences: &[Vec<String>],
    summary: &[String],
    criterion: &OracleCriterion,
) -> IndexSet {
    let n = sentences.len();
    let cap = criterion.max_select.unwrap_or(n).min(n);
    let mut selected = IndexSet::new();
    let mut best_so_far = 0.0f64;
    while selected.len() < cap {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !selected.contains(i)) {
            let candidate = concat_in_order(
                selected
                    .iter()
                    .copied()
                    .chain(std::iter::once(i))
                    .collect::<IndexSet>()
                    .iter()
                    .map(|&j| sentences[j].as_slice()),
            );
            let score = criterion.metric.score(&candidate, summary);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        let Some((i, score)) = best else { break };
        let improves = score - best_so_far > 0.0;
        let forced = selected.len() < criterion.min_select;
        if !(improves || forced || !criterion.stop_on_no_gain) {
            break;
        }
        selected.insert(i);
        best_so_far = score;
    }
    selected
}

/// Greedy pseudo oracle for a cluster against its gold summary.
pub fn build_pseudo_oracle(
    cluster: &DocumentCluster,
    criterion: &OracleCriterion,
    tokenizer: &TokenizerConfig,
    rouge: &RougeConfig,
) -> Result<IndexSet> {
    let summary = rouge.prepare(&cluster.require_summary(tokenizer)?);
    let sentences: Vec<Vec<String>> = cluster
        .sentences
        .iter()
        .map(|s| rouge.prepare(&s.tokens))
        .collect();
    Ok(greedy_oracle(&sentences, &summary, criterion))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WeightShift {
    /// Add a constant so the largest non-oracle weight is one.
    #[default]
    Additive,
    /// Divide by the largest non-oracle weight.
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PorConfig {
    pub gamma: f64,
    pub shift: WeightShift,
    /// Which ROUGE-1 statistic of a sentence against the summary is relaxed.
    pub statistic: Statistic,
}

impl Default for PorConfig {
    fn default() -> Self {
        PorConfig {
            gamma: 10.0,
            shift: WeightShift::Additive,
            statistic: Statistic::F1,
        }
    }
}

impl PorConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let shift = match cfg.str("por.shift")? {
            None | Some("additive") => WeightShift::Additive,
            Some("multiplicative") => WeightShift::Multiplicative,
            Some(s) => return Err(Error::Config(format!("unknown por.shift `{s}`"))),
        };
        let statistic = match cfg.str("por.statistic")? {
            None | Some("f1") => Statistic::F1,
            Some("recall") => Statistic::Recall,
            Some("precision") => Statistic::Precision,
            Some(s) => return Err(Error::Config(format!("unknown por.statistic `{s}`"))),
        };
        let gamma = cfg.f64("por.gamma", d.gamma)?;
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Config(
                "por.gamma must be a non-negative number".into(),
            ));
        }
        Ok(PorConfig {
            gamma,
            shift,
            statistic,
        })
    }
}

/// Relaxed weights from per-sentence ROUGE-1 values.
///
/// Oracle sentences get weight one; every other sentence gets
/// `(1 - rouge1)^gamma`, shifted so the largest non-oracle weight is one and
/// clamped to `[0, 1]`.
pub fn por_weights_from_scores(
    rouge1: &[f64],
    oracle: &IndexSet,
    gamma: f64,
    shift: WeightShift,
) -> Vec<f64> {
    let raw: Vec<f64> = rouge1
        .iter()
        .map(|r| (1.0 - r).max(0.0).powf(gamma))
        .collect();
    let max_raw = raw
        .iter()
        .enumerate()
        .filter(|(i, _)| !oracle.contains(i))
        .map(|(_, &w)| w)
        .fold(f64::NEG_INFINITY, f64::max);
    raw.iter()
        .enumerate()
        .map(|(i, &w)| {
            if oracle.contains(&i) {
                return 1.0;
            }
            let shifted = match shift {
                // written as 1 - gap so the maximum lands on exactly 1.0
                WeightShift::Additive => 1.0 - (max_raw - w),
                WeightShift::Multiplicative if max_raw > 0.0 => w / max_raw,
                WeightShift::Multiplicative => 1.0,
            };
            shifted.clamp(0.0, 1.0)
        })
        .collect()
}

pub fn por_weights(
    cluster: &DocumentCluster,
    oracle: &IndexSet,
    config: &PorConfig,
    tokenizer: &TokenizerConfig,
    rouge: &RougeConfig,
) -> Result<Vec<f64>> {
    let summary = rouge.prepare(&cluster.require_summary(tokenizer)?);
    let scores: Vec<f64> = cluster
        .sentences
        .iter()
        .map(|s| rouge_n(&rouge.prepare(&s.tokens), &summary, 1).get(config.statistic))
        .collect();
    Ok(por_weights_from_scores(
        &scores,
        oracle,
        config.gamma,
        config.shift,
    ))
}

/// Oracle plus relaxed weights for one cluster, as stored in sidecar files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisionRecord {
    pub id: String,
    pub oracle: Vec<usize>,
    pub weights: Vec<f64>,
    pub gamma: f64,
}

impl SupervisionRecord {
    pub fn oracle_set(&self) -> IndexSet {
        self.oracle.iter().copied().collect()
    }
}

pub fn build_record(
    cluster: &DocumentCluster,
    criterion: &OracleCriterion,
    por: &PorConfig,
    tokenizer: &TokenizerConfig,
    rouge: &RougeConfig,
) -> Result<SupervisionRecord> {
    let oracle = build_pseudo_oracle(cluster, criterion, tokenizer, rouge)?;
    let weights = por_weights(cluster, &oracle, por, tokenizer, rouge)?;
    Ok(SupervisionRecord {
        id: cluster.id.clone(),
        oracle: oracle.into_iter().collect(),
        weights,
        gamma: por.gamma,
    })
}

/// Build records for every cluster, fanning out per cluster.
pub fn build_records(
    clusters: &[DocumentCluster],
    criterion: &OracleCriterion,
    por: &PorConfig,
    tokenizer: &TokenizerConfig,
    rouge: &RougeConfig,
) -> Result<Vec<SupervisionRecord>> {
    crate::par::map(clusters, |c| {
        build_record(c, criterion, por, tokenizer, rouge)
    })
    .into_iter()
    .collect()
}

pub fn write_records<W: Write>(mut out: W, records: &[SupervisionRecord]) -> Result<()> {
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<SupervisionRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
