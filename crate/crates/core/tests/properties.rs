use proptest::prelude::*;

use reflect_core::extractor::{greedy_select, sample_select, select_log_prob, SentenceLogits};
use reflect_core::learning::{casc_loss, credit_mask, mle_loss, CreditMode, PolicyRollout};
use reflect_core::rng::stream;
use reflect_core::supervision::IndexSet;

fn logits() -> impl Strategy<Value = SentenceLogits> {
    prop::collection::vec((-8.0f64..8.0, -8.0f64..8.0), 1..12)
        .prop_map(|v| SentenceLogits(v.into_iter().map(|(a, b)| [a, b]).collect()))
}

fn subset(n: usize) -> impl Strategy<Value = IndexSet> {
    prop::collection::vec(any::<bool>(), n).prop_map(|v| (0..v.len()).filter(|&i| v[i]).collect())
}

fn with_subsets() -> impl Strategy<Value = (SentenceLogits, IndexSet, IndexSet)> {
    logits().prop_flat_map(|l| {
        let n = l.len();
        (Just(l), subset(n), subset(n))
    })
}

proptest! {
    #[test]
    fn greedy_is_threshold_or_single_argmax(l in logits()) {
        let s = greedy_select(&l);
        let above: IndexSet = (0..l.len()).filter(|&i| l.prob(i) > 0.5).collect();
        prop_assert!(!s.indices.is_empty());
        if above.is_empty() {
            prop_assert!(s.fallback);
            prop_assert_eq!(s.indices.len(), 1);
            let i = *s.indices.first().unwrap();
            prop_assert!((0..l.len()).all(|j| l.prob(j) <= l.prob(i)));
        } else {
            prop_assert_eq!(s.indices, above);
        }
    }

    #[test]
    fn sampled_selection_is_non_empty_and_reproducible(l in logits(), seed in 0u64..1000) {
        let a = sample_select(&l, &mut stream(seed, "prop", 0));
        let b = sample_select(&l, &mut stream(seed, "prop", 0));
        prop_assert!(!a.selection.indices.is_empty());
        prop_assert_eq!(&a.selection.indices, &b.selection.indices);
        prop_assert_eq!(a.outcomes.len(), l.len());
    }

    #[test]
    fn credit_mask_set_algebra((l, s, g) in with_subsets()) {
        let n = l.len();
        let all = credit_mask(&s, &g, CreditMode::All, n);
        let distinct = credit_mask(&s, &g, CreditMode::Distinct, n);
        let inter = credit_mask(&s, &g, CreditMode::Intersection, n);
        prop_assert_eq!(all, (0..n).collect::<IndexSet>());
        prop_assert_eq!(&distinct, &s.symmetric_difference(&g).copied().collect::<IndexSet>());
        prop_assert_eq!(&inter, &s.intersection(&g).copied().collect::<IndexSet>());
        prop_assert!(distinct.is_disjoint(&inter));
    }

    #[test]
    fn unit_weight_mle_is_cross_entropy((l, s, _) in with_subsets()) {
        let ce: f64 = (0..l.len())
            .map(|i| {
                let p = 1.0 / (1.0 + (l.0[i][0] - l.0[i][1]).exp());
                if s.contains(&i) { -p.ln() } else { -(1.0 - p).ln() }
            })
            .sum();
        let loss = mle_loss(&l, &s, &vec![1.0; l.len()]);
        prop_assert!((loss - ce).abs() <= 1e-9 * ce.max(1.0), "{} vs {}", loss, ce);
    }

    #[test]
    fn masked_loss_splits_into_credited_terms((l, s, g) in with_subsets(), a in -1.0f64..1.0) {
        let n = l.len();
        let rollout = |mode| PolicyRollout {
            outcomes: (0..n).map(|i| s.contains(&i)).collect(),
            sampled: s.clone(),
            greedy: g.clone(),
            reward_sample: a,
            reward_greedy: 0.0,
            advantage: a,
            credit_mask: credit_mask(&s, &g, mode, n),
            fallback: false,
        };
        let all = casc_loss(&l, &rollout(CreditMode::All));
        prop_assert!((all + a * select_log_prob(&l, &s, None)).abs() < 1e-9);
        let distinct = casc_loss(&l, &rollout(CreditMode::Distinct));
        let rest: IndexSet = (0..n).filter(|i| s.contains(i) == g.contains(i)).collect();
        let masked_out = -a * select_log_prob(&l, &s, Some(&rest));
        prop_assert!((all - distinct - masked_out).abs() < 1e-9);
    }
}
