//! Everything a training or evaluation run needs besides the data: tokenizer,
//! scorer shape, the abstractors and the reward definition.

use serde::{Deserialize, Serialize};

use crate::abstractor::{
    make_reference, Abstractor, AbstractorSpec, ReferencePolicy, RewardConfig,
};
use crate::config::Config;
use crate::corpus::{DocumentCluster, TokenizerConfig};
use crate::error::{Error, Result};
use crate::extractor::{ExtractorConfig, ScorerParams, SentenceFeatures};
use crate::rouge::RougeConfig;

/// Selection used for the first summary reference, before any scorer exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bootstrap {
    Lead(usize),
    All,
}

impl Bootstrap {
    fn policy(self) -> ReferencePolicy<'static> {
        match self {
            Bootstrap::Lead(k) => ReferencePolicy::Lead(k),
            Bootstrap::All => ReferencePolicy::All,
        }
    }
}

#[derive(Debug)]
pub struct Pipeline {
    pub tokenizer: TokenizerConfig,
    pub rouge: RougeConfig,
    pub extractor: ExtractorConfig,
    /// Supplies rewards during self-critic training.
    pub train_abstractor: Abstractor,
    /// Produces the summaries that are evaluated.
    pub test_abstractor: Abstractor,
    /// Produces summary references.
    pub reference_abstractor: Abstractor,
    pub reward: RewardConfig,
    pub bootstrap: Bootstrap,
}

impl Pipeline {
    /// A pipeline using `spec` for every abstractor role.
    pub fn with_abstractor(spec: AbstractorSpec) -> Result<Self> {
        let tokenizer = TokenizerConfig::default();
        Ok(Pipeline {
            tokenizer,
            rouge: RougeConfig::default(),
            extractor: ExtractorConfig::default(),
            train_abstractor: Abstractor::new(spec.clone(), tokenizer)?,
            test_abstractor: Abstractor::new(spec.clone(), tokenizer)?,
            reference_abstractor: Abstractor::new(spec, tokenizer)?,
            reward: RewardConfig::default(),
            bootstrap: Bootstrap::All,
        })
    }

    /// Abstractor roles read from `abstractor.*` (training rewards),
    /// `eval_abstractor.*` (generation) and `reference_abstractor.*`; the last
    /// two default to the first.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let tokenizer = TokenizerConfig::from_config(cfg)?;
        let train = AbstractorSpec::from_config(cfg, "abstractor")?;
        let role = |prefix: &str| -> Result<AbstractorSpec> {
            if cfg.keys().any(|k| k.starts_with(&format!("{prefix}."))) {
                AbstractorSpec::from_config(cfg, prefix)
            } else {
                Ok(train.clone())
            }
        };
        let test = role("eval_abstractor")?;
        let reference = role("reference_abstractor")?;
        let bootstrap = match cfg.str("reference.bootstrap")? {
            None | Some("all") => Bootstrap::All,
            Some(s) => match s.strip_prefix("lead-").map(str::parse::<usize>) {
                Some(Ok(k)) if k > 0 => Bootstrap::Lead(k),
                _ => {
                    return Err(Error::Config(format!(
                        "reference.bootstrap must be `all` or `lead-K`, got `{s}`"
                    )))
                }
            },
        };
        Ok(Pipeline {
            tokenizer,
            rouge: RougeConfig::from_config(cfg)?,
            extractor: ExtractorConfig::from_config(cfg)?,
            train_abstractor: Abstractor::new(train, tokenizer)?,
            test_abstractor: Abstractor::new(test, tokenizer)?,
            reference_abstractor: Abstractor::new(reference, tokenizer)?,
            reward: RewardConfig::from_config(cfg)?,
            bootstrap,
        })
    }

    /// Tokenized gold summary, one entry per summary sentence.
    pub fn gold_sentences(&self, cluster: &DocumentCluster) -> Result<Vec<Vec<String>>> {
        cluster.require_summary(&self.tokenizer)?;
        Ok(cluster
            .summary_sentences(&self.tokenizer)
            .unwrap_or_default())
    }

    pub fn bootstrap_reference(&self, cluster: &DocumentCluster) -> Result<Vec<String>> {
        make_reference(
            cluster,
            self.bootstrap.policy(),
            &self.reference_abstractor,
            &self.tokenizer,
        )
        .map(|r| r.tokens)
    }

    /// Summary reference for `cluster`: the bootstrap reference, refined once
    /// by the scorer when one is given.
    pub fn reference(
        &self,
        cluster: &DocumentCluster,
        params: Option<&ScorerParams>,
    ) -> Result<Vec<String>> {
        let seed = self.bootstrap_reference(cluster)?;
        let Some(params) = params else {
            return Ok(seed);
        };
        let policy = ReferencePolicy::Extractor {
            config: &self.extractor,
            params,
            seed_reference: Some(&seed),
        };
        make_reference(cluster, policy, &self.reference_abstractor, &self.tokenizer)
            .map(|r| r.tokens)
    }

    /// Features with or without summary referencing. With `sr`, the reference
    /// comes from [`Pipeline::reference`] using `reference_params`.
    pub fn features(
        &self,
        cluster: &DocumentCluster,
        sr: bool,
        reference_params: Option<&ScorerParams>,
    ) -> Result<SentenceFeatures> {
        if sr {
            let r = self.reference(cluster, reference_params)?;
            Ok(self.extractor.features(cluster, Some(&r)))
        } else {
            Ok(self.extractor.features(cluster, None))
        }
    }
}
