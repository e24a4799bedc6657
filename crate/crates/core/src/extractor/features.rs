use std::collections::{HashMap, HashSet};

use crate::corpus::{ChunkPlan, DocumentCluster};
use crate::rouge::{f1_of, lcs_len, rouge_n};

/// Number of features per sentence.
pub const FEATURE_DIM: usize = 10;

pub const POS_IN_DOC: usize = 0;
pub const POS_IN_CLUSTER: usize = 1;
pub const LOG_LEN: usize = 2;
pub const CENTROID_UNI: usize = 3;
pub const CENTROID_BI: usize = 4;
pub const NOVELTY: usize = 5;
pub const REF_R1: usize = 6;
pub const REF_R2: usize = 7;
pub const REF_LCS: usize = 8;
pub const REF_PRESENT: usize = 9;

pub const DEFAULT_CENTROID_SIZE: usize = 20;

/// Per-sentence feature matrix (row-major) with the chunk of every sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceFeatures {
    pub values: Vec<f64>,
    pub chunk_ids: Vec<usize>,
    pub has_reference: bool,
}

impl SentenceFeatures {
    pub const DIM: usize = FEATURE_DIM;

    pub fn from_rows(rows: &[[f64; FEATURE_DIM]], chunk_ids: Vec<usize>) -> Self {
        assert_eq!(rows.len(), chunk_ids.len());
        SentenceFeatures {
            values: rows.iter().flatten().copied().collect(),
            chunk_ids,
            has_reference: rows.first().is_some_and(|r| r[REF_PRESENT] != 0.0),
        }
    }

    pub fn len(&self) -> usize {
        self.chunk_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunk_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        FEATURE_DIM
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]
    }
}

fn is_content(tok: &str) -> bool {
    tok.chars().any(char::is_alphanumeric)
}

/// The `size` most frequent content n-grams of the cluster; ties by
/// lexicographic order.
fn centroid(sentences: &[&[String]], n: usize, size: usize) -> HashSet<Vec<String>> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    for s in sentences {
        if s.len() >= n {
            for w in s.windows(n) {
                if w.iter().all(|t| is_content(t)) {
                    *counts.entry(w).or_insert(0) += 1;
                }
            }
        }
    }
    let mut ranked: Vec<(&[String], usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(size)
        .map(|(g, _)| g.to_vec())
        .collect()
}

fn centroid_f1(tokens: &[String], n: usize, centroid: &HashSet<Vec<String>>) -> f64 {
    if centroid.is_empty() || tokens.len() < n {
        return 0.0;
    }
    let grams: HashSet<&[String]> = tokens.windows(n).collect();
    let hits = grams.iter().filter(|g| centroid.contains(**g)).count();
    f1_of(
        hits as f64 / grams.len() as f64,
        hits as f64 / centroid.len() as f64,
    )
}

/// Deterministic per-sentence features, optionally conditioned on a reference
/// summary. Sentences flagged as oversized in `plan` are truncated to the
/// plan budget first.
pub fn encode(
    cluster: &DocumentCluster,
    plan: &ChunkPlan,
    reference: Option<&[String]>,
    centroid_size: usize,
) -> SentenceFeatures {
    let n = cluster.len();
    let tokens: Vec<&[String]> = cluster
        .sentences
        .iter()
        .map(|s| {
            if plan.truncated.contains(&s.index) {
                &s.tokens[..plan.budget.min(s.tokens.len())]
            } else {
                s.tokens.as_slice()
            }
        })
        .collect();
    let uni = centroid(&tokens, 1, centroid_size);
    let bi = centroid(&tokens, 2, centroid_size);
    let positions = cluster.positions_in_document();

    let mut rows = Vec::with_capacity(n);
    let mut seen: HashSet<&str> = HashSet::new();
    for (i, toks) in tokens.iter().enumerate() {
        let mut row = [0.0; FEATURE_DIM];
        let (j, doc_len) = positions[i];
        row[POS_IN_DOC] = if doc_len > 1 {
            j as f64 / (doc_len - 1) as f64
        } else {
            0.0
        };
        row[POS_IN_CLUSTER] = if n > 1 {
            i as f64 / (n - 1) as f64
        } else {
            0.0
        };
        row[LOG_LEN] = (toks.len() as f64).ln_1p();
        row[CENTROID_UNI] = centroid_f1(toks, 1, &uni);
        row[CENTROID_BI] = centroid_f1(toks, 2, &bi);

        let distinct: HashSet<&str> = toks.iter().map(String::as_str).collect();
        row[NOVELTY] = if distinct.is_empty() {
            0.0
        } else {
            distinct.iter().filter(|t| !seen.contains(*t)).count() as f64 / distinct.len() as f64
        };
        seen.extend(distinct);

        if let Some(r) = reference {
            row[REF_R1] = rouge_n(toks, r, 1).f1;
            row[REF_R2] = rouge_n(toks, r, 2).f1;
            row[REF_LCS] = if toks.is_empty() {
                0.0
            } else {
                lcs_len(toks, r) as f64 / toks.len() as f64
            };
            row[REF_PRESENT] = 1.0;
        }
        rows.push(row);
    }
    SentenceFeatures::from_rows(&rows, plan.chunk_ids())
}
