//! Deterministic synthetic data: a toy multi-document corpus and a
//! Jaccard-reward bandit over fixed feature rows.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use crate::corpus::{DocumentCluster, TokenizerConfig};
use crate::error::Result;
use crate::extractor::{greedy_select, score, ScorerParams, SentenceFeatures, FEATURE_DIM};
use crate::learning::{casc_step, CreditMode, Optimizer};
use crate::rng::{seeded, Rng};
use crate::supervision::IndexSet;

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

fn word(rng: &mut Rng) -> String {
    let syllables = rng.random_range(2..=3);
    (0..syllables)
        .map(|_| {
            format!(
                "{}{}",
                ONSETS.choose(rng).unwrap(),
                NUCLEI.choose(rng).unwrap()
            )
        })
        .collect()
}

fn words(rng: &mut Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| word(rng)).collect()
}

fn sentence(mut tokens: Vec<String>) -> String {
    if let Some(first) = tokens.first_mut() {
        let mut c = first.chars();
        *first = c
            .next()
            .map(|h| h.to_uppercase().chain(c).collect())
            .unwrap_or_default();
    }
    format!("{}.", tokens.join(" "))
}

/// Shape of the toy corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyCorpusSpec {
    pub clusters: usize,
    pub documents: usize,
    pub seed: u64,
}

impl Default for ToyCorpusSpec {
    fn default() -> Self {
        ToyCorpusSpec {
            clusters: 200,
            documents: 3,
            seed: 7,
        }
    }
}

/// Toy clusters in which every summary fact is reported by several documents.
///
/// Each fact has a set of key words. The gold summary states every fact once.
/// One document carries the complete statement of a fact and the others carry
/// partial restatements, so a greedy oracle keeps one copy and labels the
/// restatements negative even though they overlap the summary heavily.
/// Remaining sentences are filler drawn from a shared vocabulary.
pub fn toy_corpus(spec: &ToyCorpusSpec) -> Vec<DocumentCluster> {
    let mut rng = seeded(spec.seed);
    let common = words(&mut rng, 300);
    let tok = TokenizerConfig::default();
    (0..spec.clusters)
        .map(|c| {
            let topic = words(&mut rng, 2);
            let n_facts = rng.random_range(2..=4);
            let facts: Vec<Vec<String>> = (0..n_facts).map(|_| words(&mut rng, 5)).collect();
            let mut docs: Vec<Vec<String>> = vec![Vec::new(); spec.documents];
            for (f, keys) in facts.iter().enumerate() {
                let full = rng.random_range(0..spec.documents);
                for (d, doc) in docs.iter_mut().enumerate() {
                    if d != full && !rng.random_bool(0.7) {
                        continue;
                    }
                    let mut body: Vec<String> = if d == full {
                        keys.clone()
                    } else {
                        let mut partial = keys.clone();
                        partial.shuffle(&mut rng);
                        partial.truncate(3);
                        partial
                    };
                    body.push(topic[f % topic.len()].clone());
                    body.extend(
                        (0..rng.random_range(2..=4))
                            .map(|_| common.choose(&mut rng).unwrap().clone()),
                    );
                    body.shuffle(&mut rng);
                    doc.push(sentence(body));
                }
            }
            for doc in docs.iter_mut() {
                for _ in 0..rng.random_range(2..=4) {
                    let filler: Vec<String> = (0..rng.random_range(5..=9))
                        .map(|_| common.choose(&mut rng).unwrap().clone())
                        .collect();
                    let at = rng.random_range(0..=doc.len());
                    doc.insert(at, sentence(filler));
                }
            }
            let summary = facts
                .iter()
                .enumerate()
                .map(|(f, keys)| {
                    let mut s = vec![topic[f % topic.len()].clone()];
                    s.extend(keys.iter().cloned());
                    sentence(s)
                })
                .collect::<Vec<_>>()
                .join(" ");
            let texts: Vec<String> = docs.iter().map(|d| d.join(" ")).collect();
            DocumentCluster::from_sentences(format!("toy-{c:03}"), texts, docs, Some(summary), &tok)
        })
        .collect()
}

/// Single-round bandit whose arms are fixed feature rows and whose reward is
/// the Jaccard index between the chosen set and a hidden target. The target
/// is a linear threshold of the features, so a scorer can represent it.
#[derive(Debug, Clone)]
pub struct JaccardBandit {
    pub features: SentenceFeatures,
    pub target: IndexSet,
}

impl JaccardBandit {
    pub fn new(arms: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        loop {
            let rows: Vec<[f64; FEATURE_DIM]> = (0..arms)
                .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                .collect();
            let target: IndexSet = rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r[0] + 0.5 * r[1] > 0.4)
                .map(|(i, _)| i)
                .collect();
            if !target.is_empty() && target.len() < arms {
                let chunks = (0..arms).map(|i| i / 10).collect();
                return JaccardBandit {
                    features: SentenceFeatures::from_rows(&rows, chunks),
                    target,
                };
            }
        }
    }

    pub fn arms(&self) -> usize {
        self.features.len()
    }

    pub fn reward(&self, chosen: &IndexSet) -> f64 {
        let union = chosen.union(&self.target).count();
        if union == 0 {
            return 1.0;
        }
        chosen.intersection(&self.target).count() as f64 / union as f64
    }

    /// Reward of the greedy selection under `params`.
    pub fn greedy_reward(&self, params: &ScorerParams) -> Result<f64> {
        Ok(self.reward(&greedy_select(&score(&self.features, params)?).indices))
    }

    /// Run `steps` self-critic updates from `params` and return the trained
    /// parameters with the greedy reward seen at every step.
    pub fn train(
        &self,
        mut params: ScorerParams,
        optimizer: &mut Optimizer,
        mode: CreditMode,
        steps: usize,
        seed: u64,
    ) -> Result<(ScorerParams, Vec<f64>)> {
        let mut trace = Vec::with_capacity(steps);
        for step in 0..steps {
            let mut rng = crate::rng::stream(seed, "bandit", step as u64);
            let r = casc_step(
                &self.features,
                &mut params,
                optimizer,
                mode,
                &mut rng,
                |s, _| Ok(self.reward(s)),
            )?;
            trace.push(r.reward_greedy);
        }
        Ok((params, trace))
    }
}
