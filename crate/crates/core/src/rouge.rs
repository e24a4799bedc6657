//! ROUGE-N, sentence-level ROUGE-L and summary-level ROUGE-LSum over token
//! sequences.
//!
//! ROUGE-LSum follows the union-LCS procedure of the widely used
//! `rouge_score` scorer, including its LCS backtracking order and per-token
//! hit clipping.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    pub fn from_counts(hits: usize, candidate_total: usize, reference_total: usize) -> Self {
        let precision = ratio(hits, candidate_total);
        let recall = ratio(hits, reference_total);
        RougeScore {
            precision,
            recall,
            f1: f1_of(precision, recall),
        }
    }

    pub fn get(&self, stat: Statistic) -> f64 {
        match stat {
            Statistic::Precision => self.precision,
            Statistic::Recall => self.recall,
            Statistic::F1 => self.f1,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1_of(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    Precision,
    Recall,
    F1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    N(usize),
    L,
    LSum,
}

impl fmt::Display for RougeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RougeVariant::N(n) => write!(f, "rouge-{n}"),
            RougeVariant::L => f.write_str("rouge-l"),
            RougeVariant::LSum => f.write_str("rouge-lsum"),
        }
    }
}

impl FromStr for RougeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let rest = lower
            .strip_prefix("rouge-")
            .or_else(|| lower.strip_prefix("r"))
            .unwrap_or(&lower);
        match rest.trim_start_matches('-') {
            "l" => Ok(RougeVariant::L),
            "lsum" => Ok(RougeVariant::LSum),
            n => match n.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(RougeVariant::N(n)),
                _ => Err(Error::Config(format!("unknown ROUGE variant `{s}`"))),
            },
        }
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap.
pub fn rouge_n<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    assert!(n >= 1, "rouge_n requires n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let hits: usize = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    RougeScore::from_counts(hits, cand_total, ref_total)
}

fn lcs_table<T: Eq>(reference: &[T], candidate: &[T]) -> Vec<Vec<u32>> {
    let mut t = vec![vec![0u32; candidate.len() + 1]; reference.len() + 1];
    for i in 1..=reference.len() {
        for j in 1..=candidate.len() {
            t[i][j] = if reference[i - 1] == candidate[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t
}

pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // two-row DP
    let mut prev = vec![0u32; b.len() + 1];
    let mut cur = vec![0u32; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()] as usize
}

/// Indices into `reference` of one LCS with `candidate`, in the backtracking
/// order used by `rouge_score`.
fn lcs_reference_indices<T: Eq>(reference: &[T], candidate: &[T]) -> Vec<usize> {
    let t = lcs_table(reference, candidate);
    let (mut i, mut j) = (reference.len(), candidate.len());
    let mut out = Vec::new();
    while i > 0 && j > 0 {
        if reference[i - 1] == candidate[j - 1] {
            out.push(i - 1);
            i -= 1;
            j -= 1;
        } else if t[i][j - 1] > t[i - 1][j] {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    out.reverse();
    out
}

/// Sentence-level ROUGE-L.
pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_counts(
        lcs_len(candidate, reference),
        candidate.len(),
        reference.len(),
    )
}

/// Summary-level ROUGE-L with union-LCS.
pub fn rouge_lsum<T, C, R>(candidate_sentences: &[C], reference_sentences: &[R]) -> RougeScore
where
    T: Eq + Hash,
    C: AsRef<[T]>,
    R: AsRef<[T]>,
{
    let mut cand_counts: HashMap<&T, usize> = HashMap::new();
    let mut ref_counts: HashMap<&T, usize> = HashMap::new();
    let mut cand_total = 0usize;
    let mut ref_total = 0usize;
    for s in candidate_sentences {
        for t in s.as_ref() {
            *cand_counts.entry(t).or_insert(0) += 1;
            cand_total += 1;
        }
    }
    for s in reference_sentences {
        for t in s.as_ref() {
            *ref_counts.entry(t).or_insert(0) += 1;
            ref_total += 1;
        }
    }

    let mut hits = 0usize;
    for r in reference_sentences {
        let r = r.as_ref();
        let mut union: Vec<usize> = candidate_sentences
            .iter()
            .flat_map(|c| lcs_reference_indices(r, c.as_ref()))
            .collect();
        union.sort_unstable();
        union.dedup();
        for i in union {
            let tok = &r[i];
            let (Some(rc), Some(cc)) = (ref_counts.get_mut(tok), cand_counts.get_mut(tok)) else {
                continue;
            };
            if *rc > 0 && *cc > 0 {
                hits += 1;
                *rc -= 1;
                *cc -= 1;
            }
        }
    }
    RougeScore::from_counts(hits, cand_total, ref_total)
}

/// Scorer configuration; currently only the optional stemmer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RougeConfig {
    pub stemming: bool,
}

impl RougeConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        Ok(RougeConfig {
            stemming: cfg.bool("rouge.stemming", false)?,
        })
    }

    pub fn prepare(&self, tokens: &[String]) -> Vec<String> {
        if self.stemming {
            tokens.iter().map(|t| stem(t)).collect()
        } else {
            tokens.to_vec()
        }
    }

    /// Score `candidate` against `reference` given as sentence lists. Non-LSum
    /// variants flatten the sentences first.
    pub fn score(
        &self,
        variant: RougeVariant,
        candidate: &[Vec<String>],
        reference: &[Vec<String>],
    ) -> RougeScore {
        let cand: Vec<Vec<String>> = candidate.iter().map(|s| self.prepare(s)).collect();
        let refs: Vec<Vec<String>> = reference.iter().map(|s| self.prepare(s)).collect();
        match variant {
            RougeVariant::LSum => rouge_lsum(&cand, &refs),
            RougeVariant::N(n) => rouge_n(&cand.concat(), &refs.concat(), n),
            RougeVariant::L => rouge_l(&cand.concat(), &refs.concat()),
        }
    }
}

/// Light suffix stripper (plural and common verbal endings).
pub fn stem(token: &str) -> String {
    if token.chars().count() <= 3 || !token.chars().all(char::is_alphabetic) {
        return token.to_string();
    }
    for (suffix, replacement) in [
        ("sses", "ss"),
        ("ies", "y"),
        ("ing", ""),
        ("edly", ""),
        ("ed", ""),
        ("ly", ""),
        ("s", ""),
    ] {
        if let Some(stemmed) = token.strip_suffix(suffix) {
            if suffix == "s" && stemmed.ends_with('s') {
                return token.to_string();
            }
            if stemmed.chars().count() >= 3 {
                return format!("{stemmed}{replacement}");
            }
        }
    }
    token.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn rouge_n_examples() {
        let a = toks("the cat sat on the mat");
        let s = rouge_n(&a, &a, 1);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        assert_eq!(rouge_n(&toks("a b"), &toks("c d"), 1), RougeScore::ZERO);
        let s = rouge_n(&toks("the cat sat"), &toks("the cat ran"), 1);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_n_clips_repeats() {
        let s = rouge_n(&toks("the the the"), &toks("the cat"), 1);
        assert_eq!(s.precision, 1.0 / 3.0);
        assert_eq!(s.recall, 0.5);
        // candidate shorter than n
        assert_eq!(rouge_n(&toks("a"), &toks("a b"), 2), RougeScore::ZERO);
    }

    #[test]
    fn rouge_l_examples() {
        let s = rouge_l(&toks("a b c d"), &toks("a c b d"));
        assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));
        let e: Vec<&str> = vec![];
        assert_eq!(rouge_l(&e, &toks("a b")), RougeScore::ZERO);
    }

    #[test]
    fn lsum_reduces_to_l_for_single_sentences() {
        let c = vec![toks("a b c d e")];
        let r = vec![toks("b a c e d")];
        assert_eq!(rouge_lsum(&c, &r), rouge_l(&c[0], &r[0]));
    }

    #[test]
    fn lsum_full_coverage_from_split_reference() {
        let c = vec![toks("police killed the gunman")];
        let r = vec![toks("police killed"), toks("the gunman")];
        let s = rouge_lsum(&c, &r);
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.precision, 1.0);
    }

    #[test]
    fn f1_examples() {
        assert!((f1_of(0.6489, 0.4218) - 0.5113).abs() < 5e-4);
        assert_eq!(f1_of(1.0, 1.0), 1.0);
        assert_eq!(f1_of(0.0, 0.7), 0.0);
        assert_eq!(f1_of(0.0, 0.0), 0.0);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("rouge-l".parse::<RougeVariant>().unwrap(), RougeVariant::L);
        assert_eq!(
            "R-LSum".parse::<RougeVariant>().unwrap(),
            RougeVariant::LSum
        );
        assert_eq!(
            "rouge-2".parse::<RougeVariant>().unwrap(),
            RougeVariant::N(2)
        );
        assert_eq!("r1".parse::<RougeVariant>().unwrap(), RougeVariant::N(1));
        assert!("rouge-0".parse::<RougeVariant>().is_err());
        assert_eq!(RougeVariant::N(2).to_string(), "rouge-2");
    }

    #[test]
    fn stemmer() {
        assert_eq!(stem("cats"), "cat");
        assert_eq!(stem("running"), "runn");
        assert_eq!(stem("parties"), "party");
        assert_eq!(stem("class"), "class");
        assert_eq!(stem("is"), "is");
        let cfg = RougeConfig { stemming: true };
        let s = cfg.score(
            RougeVariant::N(1),
            &[vec!["cats".into()]],
            &[vec!["cat".into()]],
        );
        assert_eq!(s.f1, 1.0);
    }

    fn seq() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..6, 0..14)
    }

    proptest! {
        #[test]
        fn precision_recall_symmetry(a in seq(), b in seq(), n in 1usize..4) {
            prop_assert_eq!(rouge_n(&a, &b, n).precision, rouge_n(&b, &a, n).recall);
            prop_assert_eq!(rouge_l(&a, &b).precision, rouge_l(&b, &a).recall);
        }

        #[test]
        fn appending_reference_ngram_never_lowers_recall(a in seq(), b in seq(), n in 1usize..3, pick in 0usize..100) {
            prop_assume!(b.len() >= n);
            let start = pick % (b.len() - n + 1);
            let before = rouge_n(&a, &b, n).recall;
            let mut longer = a.clone();
            longer.extend_from_slice(&b[start..start + n]);
            prop_assert!(rouge_n(&longer, &b, n).recall >= before);
        }

        #[test]
        fn lcs_bounds_and_identity(a in seq(), b in seq()) {
            prop_assert!(lcs_len(&a, &b) <= a.len().min(b.len()));
            prop_assert_eq!(lcs_len(&a, &b), lcs_len(&b, &a));
            if !a.is_empty() {
                let s = rouge_l(&a, &a);
                prop_assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
            }
        }

        #[test]
        fn lsum_single_sentence_equals_l(a in seq(), b in seq()) {
            prop_assert_eq!(rouge_lsum(std::slice::from_ref(&a), std::slice::from_ref(&b)), rouge_l(&a, &b));
        }

        #[test]
        fn relabeling_invariance(a in seq(), b in seq(), shift in 1u8..50) {
            let relabel = |v: &Vec<u8>| v.iter().map(|x| x.wrapping_mul(7).wrapping_add(shift)).collect::<Vec<u8>>();
            let (ra, rb) = (relabel(&a), relabel(&b));
            prop_assert_eq!(rouge_n(&a, &b, 1), rouge_n(&ra, &rb, 1));
            prop_assert_eq!(rouge_n(&a, &b, 2), rouge_n(&ra, &rb, 2));
            prop_assert_eq!(rouge_l(&a, &b), rouge_l(&ra, &rb));
            let split = a.len() / 2;
            prop_assert_eq!(
                rouge_lsum(&[a[..split].to_vec(), a[split..].to_vec()], std::slice::from_ref(&b)),
                rouge_lsum(&[ra[..split].to_vec(), ra[split..].to_vec()], std::slice::from_ref(&rb))
            );
        }

        #[test]
        fn scores_in_unit_interval(a in seq(), b in seq()) {
            for s in [rouge_n(&a, &b, 1), rouge_n(&a, &b, 2), rouge_l(&a, &b)] {
                for v in [s.precision, s.recall, s.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
