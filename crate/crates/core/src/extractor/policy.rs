//! Greedy and sampled selection policies over sentence logits.

use rand::Rng as _;

use super::scorer::SentenceLogits;
use crate::supervision::IndexSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub indices: IndexSet,
    /// True when no sentence passed and the argmax sentence was substituted.
    pub fallback: bool,
}

/// Most probable sentence, smallest index on ties. `None` for no sentences.
pub fn argmax_prob(logits: &SentenceLogits) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..logits.len() {
        let p = logits.prob(i);
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((i, p));
        }
    }
    best.map(|(i, _)| i)
}

/// Sentences whose selection probability is strictly above one half.
pub fn greedy_select(logits: &SentenceLogits) -> Selection {
    let indices: IndexSet = (0..logits.len())
        .filter(|&i| logits.prob(i) > 0.5)
        .collect();
    with_fallback(logits, indices)
}

fn with_fallback(logits: &SentenceLogits, indices: IndexSet) -> Selection {
    if indices.is_empty() {
        if let Some(i) = argmax_prob(logits) {
            return Selection {
                indices: IndexSet::from([i]),
                fallback: true,
            };
        }
    }
    Selection {
        indices,
        fallback: false,
    }
}

/// Independent Bernoulli draws, one per sentence.
pub fn sample_outcomes(logits: &SentenceLogits, rng: &mut crate::rng::Rng) -> Vec<bool> {
    (0..logits.len())
        .map(|i| rng.random::<f64>() < logits.prob(i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledSelection {
    pub outcomes: Vec<bool>,
    pub selection: Selection,
}

/// Sample a selection. If every draw is zero the argmax sentence is
/// substituted and its outcome set to one, so the selection is always the
/// support of `outcomes`.
pub fn sample_select(logits: &SentenceLogits, rng: &mut crate::rng::Rng) -> SampledSelection {
    let mut outcomes = sample_outcomes(logits, rng);
    let drawn: IndexSet = outcomes
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| i)
        .collect();
    let selection = with_fallback(logits, drawn);
    if selection.fallback {
        for &i in &selection.indices {
            outcomes[i] = true;
        }
    }
    SampledSelection {
        outcomes,
        selection,
    }
}

/// Sum of log-probabilities of the realized actions (select for members of
/// `chosen`, skip otherwise), restricted to `mask` when given.
pub fn select_log_prob(logits: &SentenceLogits, chosen: &IndexSet, mask: Option<&IndexSet>) -> f64 {
    match mask {
        Some(m) => m
            .iter()
            .filter(|&&i| i < logits.len())
            .map(|&i| logits.log_prob(i, chosen.contains(&i)))
            .sum(),
        None => (0..logits.len())
            .map(|i| logits.log_prob(i, chosen.contains(&i)))
            .sum(),
    }
}
