#![allow(dead_code)]

use rand::Rng as _;
use reflect_core::corpus::{DocumentCluster, TokenizerConfig};
use reflect_core::rng::seeded;

/// Clusters where the gold summary is exactly the long sentences, one per
/// document, and every other sentence is two tokens of unrelated words.
pub fn separable_corpus(clusters: usize, seed: u64) -> Vec<DocumentCluster> {
    let mut rng = seeded(seed);
    (0..clusters)
        .map(|c| {
            let mut docs = Vec::new();
            let mut summary = Vec::new();
            for d in 0..3 {
                let key: Vec<String> = (0..8)
                    .map(|j| format!("{}{c}d{d}w{j}", if j == 0 { "K" } else { "k" }))
                    .collect();
                let key = format!("{}.", key.join(" "));
                let fillers = rng.random_range(2..=4);
                let at = rng.random_range(0..=fillers);
                let mut doc: Vec<String> = (0..fillers)
                    .map(|j| format!("f{c}d{d}a{j} f{c}d{d}b{j}"))
                    .collect();
                doc.insert(at, key.clone());
                summary.push(key);
                docs.push(doc);
            }
            DocumentCluster::from_sentences(
                format!("sep-{c:02}"),
                docs.iter().map(|d| d.join(" ")).collect(),
                docs,
                Some(summary.join(" ")),
                &TokenizerConfig::default(),
            )
        })
        .collect()
}

/// Indices of the long sentences.
pub fn long_sentences(cluster: &DocumentCluster) -> Vec<usize> {
    cluster
        .sentences
        .iter()
        .filter(|s| s.tokens.len() > 2)
        .map(|s| s.index)
        .collect()
}
