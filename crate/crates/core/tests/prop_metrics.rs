mod common;

use proptest::prelude::*;

use common::{random_simplex, reference_best, reference_score, space};
use prefprobe::metrics::{
    brute_force_best, js_divergence, js_divergence_raw, ndcg_at_k, score, MetricKind,
    RecallDenominator,
};
use prefprobe::simplex::rank_scores;
use prefprobe::{PreferenceDistribution, Ranking};

const KINDS: [MetricKind; 4] = [
    MetricKind::Ndcg,
    MetricKind::Precision,
    MetricKind::Recall(RecallDenominator::ClusterCount),
    MetricKind::Recall(RecallDenominator::StandardR),
];

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<usize>, usize, f64)> {
    (1usize..=6).prop_flat_map(|k| {
        (
            proptest::collection::vec(0.0f64..1.0, k),
            Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
            1..=k,
            0.0f64..0.6,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metrics_match_reference((gains, order, k, cut) in instance()) {
        let relevant: Vec<bool> = gains.iter().map(|&g| g > cut).collect();
        let ranking = Ranking::generated(order.clone(), gains.len()).unwrap();
        for kind in KINDS {
            if kind == MetricKind::Recall(RecallDenominator::StandardR) && !relevant.contains(&true) {
                continue;
            }
            let got = score(&ranking, &gains, &relevant, k, kind).unwrap();
            let want = reference_score(&order, &gains, &relevant, k, kind);
            prop_assert!((got - want).abs() <= 1e-12, "{kind:?}@{k}: {got} vs {want}");
            let (best, perm) = brute_force_best(&gains, &relevant, k, kind).unwrap();
            let want_best = reference_best(&gains, &relevant, k, kind);
            prop_assert!((best - want_best).abs() <= 1e-12);
            let again = reference_score(&perm, &gains, &relevant, k, kind);
            prop_assert!((again - best).abs() <= 1e-12);
        }
    }

    #[test]
    fn ndcg_monotone_under_improving_swap((gains, order, k, _) in instance(), pos in 0usize..5) {
        let n = gains.len();
        if n >= 2 {
            let i = pos % (n - 1);
            let mut worse = order.clone();
            let mut better = order;
            if gains[worse[i]] > gains[worse[i + 1]] {
                worse.swap(i, i + 1);
            } else {
                better.swap(i, i + 1);
            }
            let before = ndcg_at_k(&Ranking::generated(worse, n).unwrap(), &gains, k).unwrap();
            let after = ndcg_at_k(&Ranking::generated(better, n).unwrap(), &gains, k).unwrap();
            prop_assert!(after >= before - 1e-15, "{before} -> {after}");
        }
    }

    #[test]
    fn ideal_ranking_is_optimal(gains in proptest::collection::vec(0.0f64..1.0, 1..=6), k in 1usize..=6) {
        let k = k.min(gains.len());
        let got = ndcg_at_k(&rank_scores(&gains), &gains, k).unwrap();
        let (best, _) = brute_force_best(&gains, &[], k, MetricKind::Ndcg).unwrap();
        prop_assert!((got - best).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn js_symmetric_and_bounded(
        (p, q) in (1usize..12).prop_flat_map(|k| (
            proptest::collection::vec(1e-6f64..1.0, k),
            proptest::collection::vec(1e-6f64..1.0, k),
        ))
    ) {
        let (p, q) = (random_simplex(&p), random_simplex(&q));
        let a = js_divergence_raw(&p, &q);
        let b = js_divergence_raw(&q, &p);
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(js_divergence_raw(&p, &p).abs() <= 1e-12);
        let differs = p.iter().zip(&q).any(|(x, y)| (x - y).abs() > 1e-3);
        if differs {
            prop_assert!(a > 0.0);
        }
    }
}

#[test]
fn js_on_distributions_checks_space() {
    let p = PreferenceDistribution::new(&space(2), vec![0.7, 0.3]).unwrap();
    let q = PreferenceDistribution::new(&space(2), vec![0.5, 0.5]).unwrap();
    let v = js_divergence(&p, &q).unwrap();
    assert!((v - 0.030_305_144_839_322_33).abs() < 1e-15, "{v}");
    let other = PreferenceDistribution::new(&space(3), vec![0.2, 0.3, 0.5]).unwrap();
    assert!(js_divergence(&p, &other).is_err());
    let disjoint = js_divergence_raw(&[1.0, 0.0], &[0.0, 1.0]);
    assert_eq!(disjoint, 1.0);
}
