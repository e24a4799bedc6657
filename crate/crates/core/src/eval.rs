//! Extraction and abstraction metrics, evaluation runs and the ablation grid.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abstractor::{make_reference, ReferencePolicy, Summary};
use crate::config::Config;
use crate::corpus::{tokenize, DocumentCluster};
use crate::error::{Error, Result};
use crate::extractor::{greedy_select, score, ScorerParams};
use crate::learning::{train_casc, train_mle, CreditMode, TrainConfig};
use crate::pipeline::Pipeline;
use crate::rouge::{f1_of, RougeConfig, RougeVariant};
use crate::supervision::{build_records, IndexSet, OracleCriterion, PorConfig, SupervisionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtractionEval {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn extraction_prf(predicted: &IndexSet, oracle: &IndexSet) -> ExtractionEval {
    let hits = predicted.intersection(oracle).count() as f64;
    let precision = if predicted.is_empty() {
        0.0
    } else {
        hits / predicted.len() as f64
    };
    let recall = if oracle.is_empty() {
        0.0
    } else {
        hits / oracle.len() as f64
    };
    ExtractionEval {
        precision,
        recall,
        f1: f1_of(precision, recall),
    }
}

/// ROUGE F1 of one summary (or a mean over summaries).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AbstractionScores {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub rouge_lsum: f64,
}

impl AbstractionScores {
    pub fn compute(
        rouge: &RougeConfig,
        candidate: &[Vec<String>],
        reference: &[Vec<String>],
    ) -> Self {
        let f = |v| rouge.score(v, candidate, reference).f1;
        AbstractionScores {
            rouge1: f(RougeVariant::N(1)),
            rouge2: f(RougeVariant::N(2)),
            rouge_l: f(RougeVariant::L),
            rouge_lsum: f(RougeVariant::LSum),
        }
    }

    /// Mean of R-1, R-2 and R-L.
    pub fn average3(&self) -> f64 {
        (self.rouge1 + self.rouge2 + self.rouge_l) / 3.0
    }

    /// Mean of R-1, R-2, R-L and R-LSum.
    pub fn average4(&self) -> f64 {
        (self.rouge1 + self.rouge2 + self.rouge_l + self.rouge_lsum) / 4.0
    }
}

/// Source of the summary reference fed to scorers trained with reference
/// features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReferenceMode {
    /// Bootstrap reference refined once by the scorer being evaluated.
    #[default]
    Generated,
    /// Bootstrap reference only.
    Bootstrap,
    /// The gold summary.
    GroundTruth,
}

impl FromStr for ReferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generated" => Ok(ReferenceMode::Generated),
            "bootstrap" => Ok(ReferenceMode::Bootstrap),
            "ground-truth" => Ok(ReferenceMode::GroundTruth),
            _ => Err(Error::Config(format!(
                "unknown reference mode `{s}` (expected generated, bootstrap or ground-truth)"
            ))),
        }
    }
}

/// Training regime of an ablation row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Mle,
    SelfCritic,
    Casc,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Mle => "MLE",
            Regime::SelfCritic => "MLE+SC",
            Regime::Casc => "MLE+CASC",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub por: Option<bool>,
    pub sr: Option<bool>,
    pub regime: Option<Regime>,
    pub extraction: Option<ExtractionEval>,
    pub abstraction: AbstractionScores,
    pub clusters: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "yes",
        Some(false) => "no",
        None => "",
    }
}

impl ExperimentReport {
    const HEADER: [&'static str; 15] = [
        "label", "por", "sr", "regime", "ext_p", "ext_r", "ext_f1", "r1", "r2", "rl", "rlsum",
        "avg3", "avg4", "clusters", "skipped",
    ];

    fn cells(row: &ReportRow) -> Vec<String> {
        let num = |x: f64| format!("{x:.4}");
        let ext = |f: fn(&ExtractionEval) -> f64| {
            row.extraction
                .as_ref()
                .map(|e| num(f(e)))
                .unwrap_or_default()
        };
        let a = &row.abstraction;
        vec![
            row.label.clone(),
            flag(row.por).into(),
            flag(row.sr).into(),
            row.regime.map(|r| r.to_string()).unwrap_or_default(),
            ext(|e| e.precision),
            ext(|e| e.recall),
            ext(|e| e.f1),
            num(a.rouge1),
            num(a.rouge2),
            num(a.rouge_l),
            num(a.rouge_lsum),
            num(a.average3()),
            num(a.average4()),
            row.clusters.to_string(),
            row.skipped.to_string(),
        ]
    }

    /// CSV with four decimals for every score.
    pub fn to_csv(&self) -> String {
        let mut out = Self::HEADER.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = Self::cells(row)
                .into_iter()
                .map(|c| {
                    if c.contains([',', '"', '\n']) {
                        format!("\"{}\"", c.replace('"', "\"\""))
                    } else {
                        c
                    }
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| {} |", Self::HEADER.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(Self::HEADER.len()));
        for row in &self.rows {
            let _ = writeln!(out, "| {} |", Self::cells(row).join(" | "));
        }
        out
    }
}

/// Per-cluster outcome of an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEval {
    pub id: String,
    pub selection: IndexSet,
    pub summary: Summary,
    pub extraction: Option<ExtractionEval>,
    pub abstraction: AbstractionScores,
}

fn eval_cluster(
    pipeline: &Pipeline,
    cluster: &DocumentCluster,
    params: &ScorerParams,
    sr: bool,
    mode: ReferenceMode,
    oracle: Option<&IndexSet>,
) -> Result<ClusterEval> {
    let gold = pipeline.gold_sentences(cluster)?;
    let features = if !sr {
        pipeline.extractor.features(cluster, None)
    } else {
        let reference = match mode {
            ReferenceMode::Generated => pipeline.reference(cluster, Some(params))?,
            ReferenceMode::Bootstrap => pipeline.bootstrap_reference(cluster)?,
            ReferenceMode::GroundTruth => {
                make_reference(
                    cluster,
                    ReferencePolicy::GroundTruth,
                    &pipeline.reference_abstractor,
                    &pipeline.tokenizer,
                )?
                .tokens
            }
        };
        pipeline.extractor.features(cluster, Some(&reference))
    };
    let selection = greedy_select(&score(&features, params)?).indices;
    let summary = pipeline
        .test_abstractor
        .summarize_indices(cluster, &selection, "gen")?;
    Ok(ClusterEval {
        id: cluster.id.clone(),
        extraction: oracle.map(|o| extraction_prf(&selection, o)),
        abstraction: AbstractionScores::compute(&pipeline.rouge, &summary.sentences, &gold),
        selection,
        summary,
    })
}

/// Greedy selection, abstraction and scoring for every cluster. Clusters that
/// fail (missing summary, abstractor error) are skipped with a warning and
/// returned as errors in place.
pub fn evaluate_clusters(
    pipeline: &Pipeline,
    clusters: &[DocumentCluster],
    params: &ScorerParams,
    sr: bool,
    mode: ReferenceMode,
    oracles: Option<&[SupervisionRecord]>,
) -> Vec<Result<ClusterEval>> {
    let by_id: HashMap<&str, IndexSet> = oracles
        .unwrap_or_default()
        .iter()
        .map(|r| (r.id.as_str(), r.oracle_set()))
        .collect();
    crate::par::map(clusters, |c| {
        let oracle = if oracles.is_some() {
            by_id.get(c.id.as_str())
        } else {
            None
        };
        eval_cluster(pipeline, c, params, sr, mode, oracle)
    })
}

fn aggregate(label: &str, results: Vec<Result<ClusterEval>>) -> Result<ReportRow> {
    let mut abs = AbstractionScores::default();
    let mut ext = ExtractionEval::default();
    let (mut n, mut n_ext, mut skipped) = (0usize, 0usize, 0usize);
    let mut first_error = None;
    for r in results {
        match r {
            Ok(e) => {
                abs.rouge1 += e.abstraction.rouge1;
                abs.rouge2 += e.abstraction.rouge2;
                abs.rouge_l += e.abstraction.rouge_l;
                abs.rouge_lsum += e.abstraction.rouge_lsum;
                if let Some(x) = e.extraction {
                    ext.precision += x.precision;
                    ext.recall += x.recall;
                    ext.f1 += x.f1;
                    n_ext += 1;
                }
                n += 1;
            }
            Err(e) => {
                log::warn!("{label}: skipping cluster: {e}");
                skipped += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if n == 0 {
        return Err(first_error.unwrap_or(Error::NoExamples));
    }
    let k = n as f64;
    let abstraction = AbstractionScores {
        rouge1: abs.rouge1 / k,
        rouge2: abs.rouge2 / k,
        rouge_l: abs.rouge_l / k,
        rouge_lsum: abs.rouge_lsum / k,
    };
    let extraction = (n_ext > 0).then(|| {
        let k = n_ext as f64;
        ExtractionEval {
            precision: ext.precision / k,
            recall: ext.recall / k,
            f1: ext.f1 / k,
        }
    });
    Ok(ReportRow {
        label: label.to_string(),
        por: None,
        sr: None,
        regime: None,
        extraction,
        abstraction,
        clusters: n,
        skipped,
    })
}

/// One report row: unweighted means over the clusters that could be scored.
/// When no cluster could be scored the first failure is returned. Extraction metrics are included when oracle records are given.
pub fn evaluate(
    pipeline: &Pipeline,
    clusters: &[DocumentCluster],
    params: &ScorerParams,
    sr: bool,
    mode: ReferenceMode,
    oracles: Option<&[SupervisionRecord]>,
) -> Result<ReportRow> {
    if clusters.is_empty() {
        return Err(Error::NoExamples);
    }
    aggregate(
        "evaluate",
        evaluate_clusters(pipeline, clusters, params, sr, mode, oracles),
    )
}

/// A generated summary as written by `generate`: summary sentences are
/// separated by newlines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<Vec<usize>>,
    pub summary: String,
}

impl Hypothesis {
    pub fn from_eval(e: &ClusterEval) -> Self {
        Hypothesis {
            id: e.id.clone(),
            selected: Some(e.selection.iter().copied().collect()),
            summary: e
                .summary
                .sentences
                .iter()
                .map(|s| s.join(" "))
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }
}

pub fn read_hypotheses<R: BufRead>(reader: R) -> Result<Vec<Hypothesis>> {
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

pub fn write_hypotheses<W: Write>(mut out: W, hyps: &[Hypothesis]) -> Result<()> {
    for h in hyps {
        writeln!(out, "{}", serde_json::to_string(h)?)?;
    }
    Ok(())
}

/// Score stored summaries against the gold summaries of `clusters`.
/// Extraction metrics use the pseudo oracle from `criterion` when a
/// hypothesis lists its selected sentences. Clusters without a hypothesis are
/// skipped with a warning.
pub fn evaluate_hypotheses(
    pipeline: &Pipeline,
    clusters: &[DocumentCluster],
    hyps: &[Hypothesis],
    criterion: &OracleCriterion,
) -> Result<ReportRow> {
    if clusters.is_empty() {
        return Err(Error::NoExamples);
    }
    let by_id: HashMap<&str, &Hypothesis> = hyps.iter().map(|h| (h.id.as_str(), h)).collect();
    let results = crate::par::map(clusters, |c| -> Result<ClusterEval> {
        let h = by_id
            .get(c.id.as_str())
            .ok_or_else(|| Error::Config(format!("no hypothesis for cluster `{}`", c.id)))?;
        let gold = pipeline.gold_sentences(c)?;
        let summary = Summary {
            sentences: h
                .summary
                .lines()
                .map(|l| tokenize(l, &pipeline.tokenizer))
                .filter(|t| !t.is_empty())
                .collect(),
        };
        let selection: IndexSet = h.selected.iter().flatten().copied().collect();
        let extraction = match &h.selected {
            Some(_) => {
                let oracle = crate::supervision::build_pseudo_oracle(
                    c,
                    criterion,
                    &pipeline.tokenizer,
                    &pipeline.rouge,
                )?;
                Some(extraction_prf(&selection, &oracle))
            }
            None => None,
        };
        Ok(ClusterEval {
            id: c.id.clone(),
            abstraction: AbstractionScores::compute(&pipeline.rouge, &summary.sentences, &gold),
            selection,
            summary,
            extraction,
        })
    });
    aggregate("evaluate", results)
}

/// Settings for the POR × SR × regime grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub criterion: OracleCriterion,
    pub por: PorConfig,
    pub mle: TrainConfig,
    pub rl: TrainConfig,
    pub reference_mode: ReferenceMode,
    /// Which regimes to run; all three by default.
    pub regimes: Vec<Regime>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            criterion: OracleCriterion::default(),
            por: PorConfig::default(),
            mle: TrainConfig::default(),
            rl: TrainConfig::default(),
            reference_mode: ReferenceMode::Generated,
            regimes: vec![Regime::Mle, Regime::SelfCritic, Regime::Casc],
        }
    }
}

impl AblationConfig {
    /// Oracle and POR settings, `train.*` for the MLE stage, `casc.*` for the
    /// self-critic stage, `eval.reference_mode` and `ablate.regimes` (a comma
    /// list of `mle`, `sc`, `casc`).
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let regimes = match cfg.str("ablate.regimes")? {
            Some(s) => s
                .split(',')
                .map(|r| match r.trim() {
                    "mle" => Ok(Regime::Mle),
                    "sc" => Ok(Regime::SelfCritic),
                    "casc" => Ok(Regime::Casc),
                    other => Err(Error::Config(format!(
                        "unknown regime `{other}` (expected mle, sc or casc)"
                    ))),
                })
                .collect::<Result<_>>()?,
            None => Self::default().regimes,
        };
        Ok(AblationConfig {
            criterion: OracleCriterion::from_config(cfg)?,
            por: PorConfig::from_config(cfg)?,
            mle: TrainConfig::from_config(cfg, "train")?,
            rl: TrainConfig::from_config(cfg, "casc")?,
            reference_mode: match cfg.str("eval.reference_mode")? {
                Some(s) => s.parse()?,
                None => ReferenceMode::default(),
            },
            regimes,
        })
    }
}

/// Split off the last `fraction` of `clusters` (rounded) as a test set.
pub fn split_tail(
    mut clusters: Vec<DocumentCluster>,
    fraction: f64,
) -> Result<(Vec<DocumentCluster>, Vec<DocumentCluster>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "test fraction {fraction} is outside [0, 1)"
        )));
    }
    let n_test = (clusters.len() as f64 * fraction).round() as usize;
    let test = clusters.split_off(clusters.len() - n_test);
    Ok((clusters, test))
}

/// Train and evaluate every combination of POR on/off, SR on/off and the
/// configured regimes. Self-critic rows start from the MLE parameters of the
/// same POR/SR setting. Extraction metrics on `test` are always measured
/// against its pseudo oracle.
pub fn run_ablation(
    pipeline: &Pipeline,
    train: &[DocumentCluster],
    val: &[DocumentCluster],
    test: &[DocumentCluster],
    config: &AblationConfig,
) -> Result<ExperimentReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::NoExamples);
    }
    let train_records = build_records(
        train,
        &config.criterion,
        &config.por,
        &pipeline.tokenizer,
        &pipeline.rouge,
    )?;
    let test_records = build_records(
        test,
        &config.criterion,
        &config.por,
        &pipeline.tokenizer,
        &pipeline.rouge,
    )?;
    let mut report = ExperimentReport::default();
    for por in [false, true] {
        for sr in [false, true] {
            let mle_cfg = TrainConfig {
                por_enabled: por,
                sr_enabled: sr,
                ..config.mle
            };
            let init = pipeline.extractor.init_params(mle_cfg.seed)?;
            let mle = train_mle(pipeline, train, &train_records, val, &mle_cfg, init)?;
            for &regime in &config.regimes {
                let params = match regime {
                    Regime::Mle => mle.params.clone(),
                    Regime::SelfCritic | Regime::Casc => {
                        let rl_cfg = TrainConfig {
                            por_enabled: por,
                            sr_enabled: sr,
                            credit_mode: if regime == Regime::Casc {
                                CreditMode::Distinct
                            } else {
                                CreditMode::All
                            },
                            ..config.rl
                        };
                        let start = if rl_cfg.cold_start {
                            pipeline.extractor.init_params(rl_cfg.seed)?
                        } else {
                            mle.params.clone()
                        };
                        train_casc(pipeline, train, val, &rl_cfg, start)?.params
                    }
                };
                let label = format!(
                    "{}{}{}",
                    regime,
                    if por { "+POR" } else { "" },
                    if sr { "+SR" } else { "" }
                );
                let results = evaluate_clusters(
                    pipeline,
                    test,
                    &params,
                    sr,
                    config.reference_mode,
                    Some(&test_records),
                );
                let mut row = aggregate(&label, results)?;
                row.por = Some(por);
                row.sr = Some(sr);
                row.regime = Some(regime);
                log::info!("{label}: avg4 {:.4}", row.abstraction.average4());
                report.rows.push(row);
            }
        }
    }
    Ok(report)
}
