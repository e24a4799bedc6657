use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Order-preserving partition of a cluster's sentences into encoder-sized chunks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub chunks: Vec<Range<usize>>,
    pub budget: usize,
    /// Sentences longer than `budget`; each sits alone in its chunk and is
    /// truncated to `budget` tokens for encoding.
    pub truncated: Vec<usize>,
}

impl ChunkPlan {
    /// First-fit packing of sentence lengths into chunks of at most `budget`
    /// tokens. A zero budget is treated as one.
    pub fn first_fit(lengths: &[usize], budget: usize) -> Self {
        let budget = budget.max(1);
        let mut chunks = Vec::new();
        let mut truncated = Vec::new();
        let mut start = 0usize;
        let mut used = 0usize;
        for (i, &len) in lengths.iter().enumerate() {
            if i > start && used + len > budget {
                chunks.push(start..i);
                start = i;
                used = 0;
            }
            used += len;
            if len > budget {
                truncated.push(i);
            }
        }
        if start < lengths.len() {
            chunks.push(start..lengths.len());
        }
        ChunkPlan {
            chunks,
            budget,
            truncated,
        }
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn sentence_count(&self) -> usize {
        self.chunks.last().map_or(0, |r| r.end)
    }

    /// Chunk index of every sentence.
    pub fn chunk_ids(&self) -> Vec<usize> {
        let mut ids = Vec::with_capacity(self.sentence_count());
        for (k, r) in self.chunks.iter().enumerate() {
            ids.extend(std::iter::repeat_n(k, r.len()));
        }
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranges(plan: &ChunkPlan) -> Vec<Vec<usize>> {
        plan.chunks.iter().map(|r| r.clone().collect()).collect()
    }

    #[test]
    fn examples() {
        let p = ChunkPlan::first_fit(&[5, 5, 5], 10);
        assert_eq!(ranges(&p), vec![vec![0, 1], vec![2]]);
        assert!(p.truncated.is_empty());

        let p = ChunkPlan::first_fit(&[12], 10);
        assert_eq!(ranges(&p), vec![vec![0]]);
        assert_eq!(p.truncated, vec![0]);

        let p = ChunkPlan::first_fit(&[3, 3, 3, 3], 6);
        assert_eq!(ranges(&p), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn oversized_sentence_is_isolated() {
        let p = ChunkPlan::first_fit(&[2, 12, 2], 10);
        assert_eq!(ranges(&p), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(p.chunk_ids(), vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn partition_and_budget(lengths in prop::collection::vec(0usize..20, 0..40), budget in 1usize..30) {
            let p = ChunkPlan::first_fit(&lengths, budget);
            let flat: Vec<usize> = p.chunks.iter().flat_map(|r| r.clone()).collect();
            prop_assert_eq!(flat, (0..lengths.len()).collect::<Vec<_>>());
            for r in &p.chunks {
                prop_assert!(!r.is_empty());
                let total: usize = lengths[r.clone()].iter().sum();
                prop_assert!(total <= budget || (r.len() == 1 && p.truncated.contains(&r.start)));
            }
            // first-fit minimality: no chunk could absorb the next chunk's first sentence
            for w in p.chunks.windows(2) {
                let total: usize = lengths[w[0].clone()].iter().sum();
                prop_assert!(total + lengths[w[1].start] > budget);
            }
        }
    }
}
