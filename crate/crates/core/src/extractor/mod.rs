//! Sentence scorer: hand-built sentence features, a windowed context layer
//! and a binary selection head, plus the greedy and sampled policies.

mod features;
mod policy;
mod scorer;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use features::{encode, SentenceFeatures, DEFAULT_CENTROID_SIZE, FEATURE_DIM};
pub use features::{
    CENTROID_BI, CENTROID_UNI, LOG_LEN, NOVELTY, POS_IN_CLUSTER, POS_IN_DOC, REF_LCS, REF_PRESENT,
    REF_R1, REF_R2,
};
pub use policy::{
    argmax_prob, greedy_select, sample_outcomes, sample_select, select_log_prob, SampledSelection,
    Selection,
};
pub(crate) use scorer::sigmoid;
pub use scorer::{
    backward, forward, score, ForwardCache, ScorerParams, SentenceLogits, DEFAULT_HIDDEN,
    DEFAULT_WINDOW,
};

use crate::config::Config;
use crate::corpus::{DocumentCluster, DEFAULT_CHUNK_BUDGET};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub window: usize,
    pub hidden: usize,
    pub centroid_size: usize,
    pub chunk_budget: usize,
    pub init_scale: f64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            window: DEFAULT_WINDOW,
            hidden: DEFAULT_HIDDEN,
            centroid_size: DEFAULT_CENTROID_SIZE,
            chunk_budget: DEFAULT_CHUNK_BUDGET,
            init_scale: 0.1,
        }
    }
}

impl ExtractorConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let c = ExtractorConfig {
            window: cfg.usize("extractor.window", d.window)?,
            hidden: cfg.usize("extractor.hidden", d.hidden)?,
            centroid_size: cfg.usize("extractor.centroid_size", d.centroid_size)?,
            chunk_budget: cfg.usize("chunk.budget", d.chunk_budget)?,
            init_scale: cfg.f64("extractor.init_scale", d.init_scale)?,
        };
        if c.window.is_multiple_of(2) || c.chunk_budget == 0 || c.hidden == 0 {
            return Err(Error::Config(
                "extractor.window must be odd; extractor.hidden and chunk.budget must be positive"
                    .into(),
            ));
        }
        Ok(c)
    }

    pub fn init_params(&self, seed: u64) -> Result<ScorerParams> {
        ScorerParams::random(
            FEATURE_DIM,
            self.window,
            self.hidden,
            self.init_scale,
            &mut crate::rng::seeded(seed),
        )
    }

    pub fn features(
        &self,
        cluster: &DocumentCluster,
        reference: Option<&[String]>,
    ) -> SentenceFeatures {
        encode(
            cluster,
            &cluster.chunk_plan(self.chunk_budget),
            reference,
            self.centroid_size,
        )
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized scorer parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    #[serde(rename = "D")]
    pub dim: usize,
    pub w: usize,
    pub hidden: usize,
    /// Whether the scorer expects reference-summary features.
    pub sr: bool,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(params: &ScorerParams, sr: bool) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            dim: params.dim,
            w: params.window,
            hidden: params.hidden,
            sr,
            params: params.values.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parse and validate against the feature dimension of this build and,
    /// when given, an expected window.
    pub fn from_json(text: &str, expected_window: Option<usize>) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                ck.version
            )));
        }
        if ck.dim != FEATURE_DIM {
            return Err(Error::Checkpoint(format!(
                "D = {} but features have {FEATURE_DIM}",
                ck.dim
            )));
        }
        if let Some(w) = expected_window {
            if ck.w != w {
                return Err(Error::Checkpoint(format!(
                    "w = {} but {w} was expected",
                    ck.w
                )));
            }
        }
        if ck.w.is_multiple_of(2) {
            return Err(Error::Checkpoint(format!("w = {} must be odd", ck.w)));
        }
        let expected = ScorerParams::param_count(ck.dim, ck.w, ck.hidden);
        if ck.params.len() != expected {
            return Err(Error::Checkpoint(format!(
                "{} parameters, expected {expected}",
                ck.params.len()
            )));
        }
        if ck.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(ck)
    }

    pub fn scorer(&self) -> ScorerParams {
        ScorerParams {
            dim: self.dim,
            window: self.w,
            hidden: self.hidden,
            values: self.params.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path, expected_window: Option<usize>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, expected_window)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip_and_rejection() {
        let p = ExtractorConfig::default().init_params(9).unwrap();
        let ck = Checkpoint::new(&p, true);
        let text = ck.to_json().unwrap();
        assert!(text.starts_with(r#"{"version":1,"D":10,"w":3,"#));
        let back = Checkpoint::from_json(&text, Some(3)).unwrap();
        assert_eq!(back.scorer(), p);
        assert!(back.sr);

        assert!(matches!(
            Checkpoint::from_json(&text, Some(5)),
            Err(Error::Checkpoint(_))
        ));
        let wrong_dim = text.replacen("\"D\":10", "\"D\":11", 1);
        assert!(matches!(
            Checkpoint::from_json(&wrong_dim, None),
            Err(Error::Checkpoint(_))
        ));
        let mut short = ck.clone();
        short.params.pop();
        assert!(Checkpoint::from_json(&short.to_json().unwrap(), None).is_err());
    }

    #[test]
    fn config_rejects_even_window() {
        let mut cfg = Config::default();
        cfg.set("extractor.window", 4i64);
        assert!(ExtractorConfig::from_config(&cfg).is_err());
    }
}
