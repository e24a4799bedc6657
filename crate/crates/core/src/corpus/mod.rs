//! Document clusters: loading, tokenization, segmentation and chunking.

mod chunk;
mod segment;
mod tokenize;

use std::io::{BufRead, Write};

use log::warn;
use serde::{Deserialize, Serialize};

pub use chunk::ChunkPlan;
pub use segment::split_sentences;
pub use tokenize::{tokenize, TokenizerConfig};

use crate::error::{Error, Result};

/// Default encoder input budget in tokens.
pub const DEFAULT_CHUNK_BUDGET: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub tokens: Vec<String>,
    pub raw: String,
    pub doc_index: usize,
}

/// One multi-document example. `sentences` is the flattened concatenation of
/// every document's sentences in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentCluster {
    pub id: String,
    pub documents: Vec<String>,
    pub sentences: Vec<Sentence>,
    pub summary: Option<String>,
    /// True when `sentences` came from the input file rather than the splitter.
    presegmented: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum SentenceField {
    PerDocument(Vec<Vec<String>>),
    Flat(Vec<String>),
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusterRecord {
    id: String,
    documents: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentences: Option<SentenceField>,
}

impl DocumentCluster {
    /// Segment and tokenize `documents` into a cluster.
    pub fn from_documents(
        id: impl Into<String>,
        documents: Vec<String>,
        summary: Option<String>,
        tok: &TokenizerConfig,
    ) -> Self {
        let per_doc: Vec<Vec<String>> = documents.iter().map(|d| split_sentences(d)).collect();
        Self::build(id.into(), documents, per_doc, summary, false, tok)
    }

    /// Build a cluster from already-segmented sentences, one list per document.
    pub fn from_sentences(
        id: impl Into<String>,
        documents: Vec<String>,
        sentences: Vec<Vec<String>>,
        summary: Option<String>,
        tok: &TokenizerConfig,
    ) -> Self {
        Self::build(id.into(), documents, sentences, summary, true, tok)
    }

    fn build(
        id: String,
        documents: Vec<String>,
        per_doc: Vec<Vec<String>>,
        summary: Option<String>,
        presegmented: bool,
        tok: &TokenizerConfig,
    ) -> Self {
        let mut sentences = Vec::new();
        for (doc_index, doc) in per_doc.into_iter().enumerate() {
            for raw in doc {
                sentences.push(Sentence {
                    index: sentences.len(),
                    tokens: tokenize(&raw, tok),
                    raw,
                    doc_index,
                });
            }
        }
        DocumentCluster {
            id,
            documents,
            sentences,
            summary,
            presegmented,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn document_count(&self) -> usize {
        self.sentences.last().map_or(0, |s| s.doc_index + 1)
    }

    /// Position of each sentence within its own document.
    pub fn positions_in_document(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.len());
        let mut i = 0;
        while i < self.len() {
            let doc = self.sentences[i].doc_index;
            let end = self.sentences[i..]
                .iter()
                .position(|s| s.doc_index != doc)
                .map_or(self.len(), |p| i + p);
            let n = end - i;
            out.extend((0..n).map(|j| (j, n)));
            i = end;
        }
        out
    }

    pub fn summary_tokens(&self, tok: &TokenizerConfig) -> Option<Vec<String>> {
        self.summary.as_deref().map(|s| tokenize(s, tok))
    }

    /// Gold summary split into tokenized sentences.
    pub fn summary_sentences(&self, tok: &TokenizerConfig) -> Option<Vec<Vec<String>>> {
        self.summary.as_deref().map(|s| {
            split_sentences(s)
                .iter()
                .map(|x| tokenize(x, tok))
                .collect()
        })
    }

    /// Summary tokens, or an error when the summary is missing or empty.
    pub fn require_summary(&self, tok: &TokenizerConfig) -> Result<Vec<String>> {
        let tokens = self
            .summary_tokens(tok)
            .ok_or_else(|| Error::MissingSummary(self.id.clone()))?;
        if tokens.is_empty() {
            return Err(Error::EmptySummary(self.id.clone()));
        }
        Ok(tokens)
    }

    pub fn chunk_plan(&self, budget: usize) -> ChunkPlan {
        let lengths: Vec<usize> = self.sentences.iter().map(|s| s.tokens.len()).collect();
        ChunkPlan::first_fit(&lengths, budget)
    }

    /// Serialize as one JSONL record. Clusters loaded from pre-segmented input
    /// keep their segmentation; others are written back without `sentences`.
    pub fn to_json_line(&self) -> Result<String> {
        let sentences = self.presegmented.then(|| {
            let mut per_doc = vec![Vec::new(); self.documents.len().max(self.document_count())];
            for s in &self.sentences {
                per_doc[s.doc_index].push(s.raw.clone());
            }
            SentenceField::PerDocument(per_doc)
        });
        let record = ClusterRecord {
            id: self.id.clone(),
            documents: self.documents.clone(),
            summary: self.summary.clone(),
            sentences,
        };
        Ok(serde_json::to_string(&record)?)
    }
}

/// Make a chunk plan for `cluster` under a token budget.
pub fn make_chunk_plan(cluster: &DocumentCluster, budget: usize) -> ChunkPlan {
    cluster.chunk_plan(budget)
}

fn parse_line(line: &str, line_no: usize, tok: &TokenizerConfig) -> Result<DocumentCluster> {
    let record: ClusterRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    Ok(match record.sentences {
        Some(SentenceField::PerDocument(per_doc)) => DocumentCluster::from_sentences(
            record.id,
            record.documents,
            per_doc,
            record.summary,
            tok,
        ),
        Some(SentenceField::Flat(flat)) => DocumentCluster::from_sentences(
            record.id,
            record.documents,
            vec![flat],
            record.summary,
            tok,
        ),
        None => DocumentCluster::from_documents(record.id, record.documents, record.summary, tok),
    })
}

/// Streaming JSONL cluster reader. Blank lines are ignored; clusters without
/// sentences are skipped with a warning.
pub struct ClusterReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    tokenizer: TokenizerConfig,
}

impl<R: BufRead> ClusterReader<R> {
    pub fn new(reader: R, tokenizer: TokenizerConfig) -> Self {
        ClusterReader {
            lines: reader.lines(),
            line_no: 0,
            tokenizer,
        }
    }
}

impl<R: BufRead> Iterator for ClusterReader<R> {
    type Item = Result<DocumentCluster>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_line(&line, self.line_no, &self.tokenizer) {
                Ok(c) if c.is_empty() => {
                    warn!(
                        "line {}: cluster `{}` has no sentences, skipped",
                        self.line_no, c.id
                    );
                }
                other => return Some(other),
            }
        }
    }
}

/// Load every cluster in a JSONL file, failing on the first malformed line.
pub fn load_clusters(
    path: &std::path::Path,
    tokenizer: &TokenizerConfig,
) -> Result<Vec<DocumentCluster>> {
    let file = std::fs::File::open(path)?;
    ClusterReader::new(std::io::BufReader::new(file), *tokenizer).collect()
}

pub fn write_clusters<W: Write>(mut out: W, clusters: &[DocumentCluster]) -> Result<()> {
    for c in clusters {
        writeln!(out, "{}", c.to_json_line()?)?;
    }
    Ok(())
}
