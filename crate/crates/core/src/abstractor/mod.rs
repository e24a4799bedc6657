//! Summary generation from selected sentences, summary references and
//! abstractor-based rewards.

mod external;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

pub use external::{AdapterRequest, AdapterResponse, ExternalPool, Handshake, PROTOCOL};

use crate::config::Config;
use crate::corpus::{split_sentences, tokenize, DocumentCluster, Sentence, TokenizerConfig};
use crate::error::{Error, Result};
use crate::extractor::{greedy_select, score, ExtractorConfig, ScorerParams};
use crate::rouge::{rouge_n, RougeConfig, RougeVariant, Statistic};
use crate::supervision::IndexSet;

pub const DEFAULT_BUDGET: usize = 256;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbstractorKind {
    ConcatTruncate,
    CentralityCompress,
    External,
}

impl FromStr for AbstractorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" | "concat-truncate" => Ok(AbstractorKind::ConcatTruncate),
            "centrality" | "centrality-compress" => Ok(AbstractorKind::CentralityCompress),
            "external" => Ok(AbstractorKind::External),
            _ => Err(Error::Config(format!(
                "unknown abstractor `{s}` (expected concat, centrality or external)"
            ))),
        }
    }
}

impl fmt::Display for AbstractorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbstractorKind::ConcatTruncate => "concat",
            AbstractorKind::CentralityCompress => "centrality",
            AbstractorKind::External => "external",
        })
    }
}

/// What the external adapter receives for each sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SendMode {
    /// Tokens joined by single spaces; a whitespace-splitting adapter then
    /// counts tokens exactly as the built-in abstractors do.
    #[default]
    Tokens,
    /// Original sentence text.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractorSpec {
    pub kind: AbstractorKind,
    pub budget: usize,
    pub external_command: Option<String>,
    pub timeout: Duration,
    /// On external failure, warn and use concat-truncate instead.
    pub fallback_to_concat: bool,
    pub send: SendMode,
}

impl Default for AbstractorSpec {
    fn default() -> Self {
        AbstractorSpec {
            kind: AbstractorKind::ConcatTruncate,
            budget: DEFAULT_BUDGET,
            external_command: None,
            timeout: DEFAULT_TIMEOUT,
            fallback_to_concat: false,
            send: SendMode::Tokens,
        }
    }
}

impl AbstractorSpec {
    pub fn concat(budget: usize) -> Self {
        AbstractorSpec {
            budget,
            ..Self::default()
        }
    }

    pub fn centrality(budget: usize) -> Self {
        AbstractorSpec {
            kind: AbstractorKind::CentralityCompress,
            budget,
            ..Self::default()
        }
    }

    pub fn external(command: impl Into<String>, budget: usize) -> Self {
        AbstractorSpec {
            kind: AbstractorKind::External,
            budget,
            external_command: Some(command.into()),
            ..Self::default()
        }
    }

    /// Read `<prefix>.kind`, `.budget`, `.command`, `.timeout_s`,
    /// `.fallback` and `.send`.
    pub fn from_config(cfg: &Config, prefix: &str) -> Result<Self> {
        let d = Self::default();
        let key = |k: &str| format!("{prefix}.{k}");
        let kind = match cfg.str(&key("kind"))? {
            Some(s) => s.parse()?,
            None => d.kind,
        };
        let send = match cfg.str(&key("send"))? {
            None | Some("tokens") => SendMode::Tokens,
            Some("raw") => SendMode::Raw,
            Some(s) => return Err(Error::Config(format!("unknown {} `{s}`", key("send")))),
        };
        let spec = AbstractorSpec {
            kind,
            budget: cfg.usize(&key("budget"), d.budget)?,
            external_command: cfg.str(&key("command"))?.map(String::from),
            timeout: Duration::from_secs_f64(cfg.f64(&key("timeout_s"), d.timeout.as_secs_f64())?),
            fallback_to_concat: cfg.bool(&key("fallback"), d.fallback_to_concat)?,
            send,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("abstractor budget must be at least 1".into()));
        }
        if self.kind == AbstractorKind::External && self.external_command.is_none() {
            return Err(Error::Config("external abstractor needs a command".into()));
        }
        Ok(())
    }
}

/// Generated summary as tokenized sentences.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Summary {
    pub sentences: Vec<Vec<String>>,
}

impl Summary {
    pub fn tokens(&self) -> Vec<String> {
        self.sentences.concat()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.join(" "))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Concatenate in the given order, cutting the total to `budget` tokens.
pub fn concat_truncate(sentences: &[&[String]], budget: usize) -> Summary {
    let mut left = budget;
    let mut out = Vec::new();
    for s in sentences {
        if left == 0 {
            break;
        }
        let take = s.len().min(left);
        if take > 0 {
            out.push(s[..take].to_vec());
        }
        left -= take;
    }
    Summary { sentences: out }
}

/// Mean unigram ROUGE-1 F1 of each sentence against the others.
pub fn centrality_scores(sentences: &[&[String]]) -> Vec<f64> {
    let n = sentences.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let total: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| rouge_n(sentences[i], sentences[j], 1).f1)
                .sum();
            total / (n - 1) as f64
        })
        .collect()
}

/// Keep the most central sentences while they fit the budget, then emit them
/// in input order. If the most central sentence alone exceeds the budget it
/// is truncated.
pub fn centrality_compress(sentences: &[&[String]], budget: usize) -> Summary {
    let scores = centrality_scores(sentences);
    let mut ranked: Vec<usize> = (0..sentences.len()).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept = Vec::new();
    let mut used = 0usize;
    for i in ranked {
        let len = sentences[i].len();
        if used + len > budget {
            break;
        }
        used += len;
        kept.push(i);
    }
    if kept.is_empty() {
        return match sentences
            .iter()
            .enumerate()
            .max_by(|a, b| scores[a.0].total_cmp(&scores[b.0]).then(b.0.cmp(&a.0)))
        {
            Some((_, s)) => concat_truncate(&[s], budget),
            None => Summary::default(),
        };
    }
    kept.sort_unstable();
    Summary {
        sentences: kept.into_iter().map(|i| sentences[i].to_vec()).collect(),
    }
}

/// A configured abstractor. Built-in kinds are pure; the external kind owns a
/// pool of adapter processes.
pub struct Abstractor {
    spec: AbstractorSpec,
    tokenizer: TokenizerConfig,
    pool: Option<ExternalPool>,
}

impl fmt::Debug for Abstractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Abstractor")
            .field("spec", &self.spec)
            .finish()
    }
}

impl Abstractor {
    pub fn new(spec: AbstractorSpec, tokenizer: TokenizerConfig) -> Result<Self> {
        spec.validate()?;
        let pool = match (&spec.kind, &spec.external_command) {
            (AbstractorKind::External, Some(cmd)) => {
                Some(ExternalPool::new(cmd.clone(), spec.timeout))
            }
            _ => None,
        };
        Ok(Abstractor {
            spec,
            tokenizer,
            pool,
        })
    }

    pub fn spec(&self) -> &AbstractorSpec {
        &self.spec
    }

    /// Summarize `selected`, which is put into document order first. `id`
    /// tags external requests.
    pub fn summarize(&self, id: &str, selected: &[&Sentence]) -> Result<Summary> {
        let mut ordered = selected.to_vec();
        ordered.sort_by_key(|s| s.index);
        let tokens: Vec<&[String]> = ordered.iter().map(|s| s.tokens.as_slice()).collect();
        match self.spec.kind {
            AbstractorKind::ConcatTruncate => Ok(concat_truncate(&tokens, self.spec.budget)),
            AbstractorKind::CentralityCompress => {
                Ok(centrality_compress(&tokens, self.spec.budget))
            }
            AbstractorKind::External => {
                let pool = self.pool.as_ref().expect("external abstractor has a pool");
                let joined: Vec<String>;
                let texts: Vec<&str> = match self.spec.send {
                    SendMode::Raw => ordered.iter().map(|s| s.raw.as_str()).collect(),
                    SendMode::Tokens => {
                        joined = ordered.iter().map(|s| s.tokens.join(" ")).collect();
                        joined.iter().map(String::as_str).collect()
                    }
                };
                match pool.summarize(id, &texts, self.spec.budget) {
                    Ok(text) => Ok(Summary {
                        sentences: split_sentences(&text)
                            .iter()
                            .map(|s| tokenize(s, &self.tokenizer))
                            .filter(|t| !t.is_empty())
                            .collect(),
                    }),
                    Err(e) if self.spec.fallback_to_concat => {
                        warn!("{e}; falling back to concat-truncate for {id}");
                        Ok(concat_truncate(&tokens, self.spec.budget))
                    }
                    Err(e) => Err(e),
                }
            }
        }
    }

    /// Summarize the sentences of `cluster` listed in `indices`.
    pub fn summarize_indices(
        &self,
        cluster: &DocumentCluster,
        indices: &IndexSet,
        tag: &str,
    ) -> Result<Summary> {
        let selected: Vec<&Sentence> = indices
            .iter()
            .filter_map(|&i| cluster.sentences.get(i))
            .collect();
        self.summarize(&format!("{}#{tag}", cluster.id), &selected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceSource {
    Abstractor,
    GroundTruth,
    ExternalModel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSummary {
    pub tokens: Vec<String>,
    pub source: ReferenceSource,
}

/// How the sentences behind a summary reference are chosen.
#[derive(Debug, Clone, Copy)]
pub enum ReferencePolicy<'a> {
    /// First `k` sentences of the cluster.
    Lead(usize),
    /// Every sentence (the abstractor truncates).
    All,
    /// Greedy selection of a trained scorer. `seed_reference` is fed to
    /// scorers trained with reference features.
    Extractor {
        config: &'a ExtractorConfig,
        params: &'a ScorerParams,
        seed_reference: Option<&'a [String]>,
    },
    /// The gold summary itself.
    GroundTruth,
}

pub fn make_reference(
    cluster: &DocumentCluster,
    policy: ReferencePolicy<'_>,
    abstractor: &Abstractor,
    tokenizer: &TokenizerConfig,
) -> Result<ReferenceSummary> {
    let indices: IndexSet = match policy {
        ReferencePolicy::GroundTruth => {
            return Ok(ReferenceSummary {
                tokens: cluster.require_summary(tokenizer)?,
                source: ReferenceSource::GroundTruth,
            })
        }
        ReferencePolicy::Lead(k) => (0..k.min(cluster.len())).collect(),
        ReferencePolicy::All => (0..cluster.len()).collect(),
        ReferencePolicy::Extractor {
            config,
            params,
            seed_reference,
        } => {
            let features = config.features(cluster, seed_reference);
            greedy_select(&score(&features, params)?).indices
        }
    };
    let summary = abstractor.summarize_indices(cluster, &indices, "ref")?;
    let source = if abstractor.spec().kind == AbstractorKind::External {
        ReferenceSource::ExternalModel
    } else {
        ReferenceSource::Abstractor
    };
    Ok(ReferenceSummary {
        tokens: summary.tokens(),
        source,
    })
}

/// Which ROUGE statistic of the abstracted selection serves as the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub variant: RougeVariant,
    pub statistic: Statistic,
    pub rouge: RougeConfig,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            variant: RougeVariant::L,
            statistic: Statistic::F1,
            rouge: RougeConfig::default(),
        }
    }
}

impl RewardConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let variant = match cfg.str("reward.metric")? {
            Some(s) => s.parse()?,
            None => d.variant,
        };
        let statistic = match cfg.str("reward.statistic")? {
            None | Some("f1") => Statistic::F1,
            Some("recall") => Statistic::Recall,
            Some("precision") => Statistic::Precision,
            Some(s) => return Err(Error::Config(format!("unknown reward.statistic `{s}`"))),
        };
        Ok(RewardConfig {
            variant,
            statistic,
            rouge: RougeConfig::from_config(cfg)?,
        })
    }

    pub fn score(&self, summary: &Summary, gold: &[Vec<String>]) -> f64 {
        self.rouge
            .score(self.variant, &summary.sentences, gold)
            .get(self.statistic)
    }
}

/// ROUGE of the abstracted selection against the gold summary sentences.
pub fn reward(
    cluster: &DocumentCluster,
    selected: &IndexSet,
    gold: &[Vec<String>],
    abstractor: &Abstractor,
    config: &RewardConfig,
    tag: &str,
) -> Result<f64> {
    let summary = abstractor.summarize_indices(cluster, selected, tag)?;
    Ok(config.score(&summary, gold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rouge::rouge_l;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn cluster(sentences: &[&str], summary: &str) -> DocumentCluster {
        DocumentCluster::from_sentences(
            "c",
            vec![sentences.join(" ")],
            vec![sentences.iter().map(|s| s.to_string()).collect()],
            Some(summary.into()),
            &TokenizerConfig::default(),
        )
    }

    #[test]
    fn concat_examples() {
        let one = toks("a b c d e");
        assert_eq!(concat_truncate(&[&one], 100).tokens(), one);
        let (x, y) = (toks("1 2 3 4 5 6 7 8"), toks("a b c d e f g h"));
        let s = concat_truncate(&[&x, &y], 10);
        assert_eq!(s.tokens(), toks("1 2 3 4 5 6 7 8 a b"));
        assert_eq!(s.sentences.len(), 2);
    }

    #[test]
    fn centrality_hand_computed() {
        // pairwise ROUGE-1 F1 (all sentences have 3 distinct tokens):
        // s0-s1: {x,y} 2/3; s0-s2: {x} 1/3; s0-s3: 0; s1-s2: {x} 1/3;
        // s1-s3: 0; s2-s3: {q} 1/3
        // centrality: s0 = 1/3, s1 = 1/3, s2 = 1/3, s3 = 1/9
        // ties broken by index: keep s0, s1 with a budget of 6 tokens
        let s: Vec<Vec<String>> = ["x y z", "x y w", "x p q", "q r t"]
            .iter()
            .map(|t| toks(t))
            .collect();
        let refs: Vec<&[String]> = s.iter().map(Vec::as_slice).collect();
        let c = centrality_scores(&refs);
        let expect = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 9.0];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let out = centrality_compress(&refs, 6);
        assert_eq!(out.sentences, vec![s[0].clone(), s[1].clone()]);
    }

    #[test]
    fn centrality_prefers_central_and_reemits_in_order() {
        let s: Vec<Vec<String>> = ["u v w", "a b c", "a b d", "a e f"]
            .iter()
            .map(|t| toks(t))
            .collect();
        let refs: Vec<&[String]> = s.iter().map(Vec::as_slice).collect();
        // s1 and s2 share two tokens with each other and one with s3
        let out = centrality_compress(&refs, 6);
        assert_eq!(out.sentences, vec![s[1].clone(), s[2].clone()]);
        // budget below one sentence truncates the most central one
        assert_eq!(centrality_compress(&refs, 2).tokens(), toks("a b"));
    }

    #[test]
    fn summarize_orders_by_document_position() {
        let c = cluster(&["Gamma one.", "Alpha two."], "x");
        let abs = Abstractor::new(AbstractorSpec::concat(100), TokenizerConfig::default()).unwrap();
        let fwd = abs
            .summarize("a", &[&c.sentences[0], &c.sentences[1]])
            .unwrap();
        let rev = abs
            .summarize("a", &[&c.sentences[1], &c.sentences[0]])
            .unwrap();
        assert_eq!(fwd, rev);
        assert_eq!(fwd.tokens()[0], "gamma");
    }

    #[test]
    fn references() {
        let tok = TokenizerConfig::default();
        let c = cluster(
            &["First thing here.", "Second.", "Third one."],
            "Gold words.",
        );
        let abs = Abstractor::new(AbstractorSpec::concat(2), tok).unwrap();
        let r = make_reference(&c, ReferencePolicy::Lead(1), &abs, &tok).unwrap();
        assert_eq!(r.tokens, toks("first thing"));
        assert_eq!(r.source, ReferenceSource::Abstractor);
        let r = make_reference(&c, ReferencePolicy::GroundTruth, &abs, &tok).unwrap();
        assert_eq!(r.tokens, toks("gold words ."));
        assert_eq!(r.source, ReferenceSource::GroundTruth);

        // scorer whose greedy set is {2}: bias towards selection only for the
        // last position in the cluster
        let cfg = ExtractorConfig::default();
        let mut p =
            ScorerParams::zeros(crate::extractor::FEATURE_DIM, cfg.window, cfg.hidden).unwrap();
        p.head_bias_mut().copy_from_slice(&[0.5, 0.0]);
        p.direct_weights_mut(1)[crate::extractor::POS_IN_CLUSTER] = 1.0;
        let abs = Abstractor::new(AbstractorSpec::concat(50), tok).unwrap();
        let policy = ReferencePolicy::Extractor {
            config: &cfg,
            params: &p,
            seed_reference: None,
        };
        let r = make_reference(&c, policy, &abs, &tok).unwrap();
        assert_eq!(r.tokens, toks("third one ."));
    }

    #[test]
    fn reward_cases() {
        let tok = TokenizerConfig::default();
        let c = cluster(
            &["The storm hit the coast.", "Markets fell sharply."],
            "The storm hit the coast.",
        );
        let gold = c.summary_sentences(&tok).unwrap();
        let abs = Abstractor::new(AbstractorSpec::concat(100), tok).unwrap();
        let cfg = RewardConfig::default();
        assert_eq!(
            reward(&c, &IndexSet::from([0]), &gold, &abs, &cfg, "s").unwrap(),
            1.0
        );
        let c2 = cluster(&["Quiet night.", "Nothing."], "The storm hit the coast");
        let gold2 = c2.summary_sentences(&tok).unwrap();
        assert_eq!(
            reward(&c2, &IndexSet::from([0, 1]), &gold2, &abs, &cfg, "s").unwrap(),
            0.0
        );

        // composition: ROUGE-L F1 of the abstract against the gold summary
        let sel = IndexSet::from([0, 1]);
        let summary = abs.summarize_indices(&c, &sel, "x").unwrap();
        let expected = rouge_l(&summary.tokens(), &c.summary_tokens(&tok).unwrap()).f1;
        assert_eq!(reward(&c, &sel, &gold, &abs, &cfg, "s").unwrap(), expected);
    }

    #[test]
    fn spec_parsing() {
        let cfg =
            Config::parse("abstractor.kind = \"centrality\"\nabstractor.budget = 40\n").unwrap();
        let spec = AbstractorSpec::from_config(&cfg, "abstractor").unwrap();
        assert_eq!(spec.kind, AbstractorKind::CentralityCompress);
        assert_eq!(spec.budget, 40);
        let cfg = Config::parse("abstractor.kind = \"external\"").unwrap();
        assert!(AbstractorSpec::from_config(&cfg, "abstractor").is_err());
        assert!(AbstractorSpec::concat(0).validate().is_err());
    }
}
