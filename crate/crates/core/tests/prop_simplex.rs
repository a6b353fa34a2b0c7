use proptest::prelude::*;

use prefprobe::simplex::{argsort_descending, rank_scores};
use prefprobe::{empirical_proxy, rank_descending, softmax, ClusterSpace, PreferenceDistribution};

fn distinct_scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::hash_set(-1000i32..1000, 1..max_len)
        .prop_map(|s| s.into_iter().map(|v| v as f64 / 100.0).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn softmax_sums_to_one(
        scores in proptest::collection::vec(-1e4f64..1e4, 1..40),
        tau in 1e-3f64..10.0,
    ) {
        let p = softmax(&scores, tau).unwrap();
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12, "sum {sum}");
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn softmax_preserves_strict_order(
        scores in proptest::collection::vec(-30f64..30.0, 2..30),
        tau in 0.5f64..5.0,
    ) {
        let p = softmax(&scores, tau).unwrap();
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] > scores[j] + 1e-6 {
                    prop_assert!(p[i] > p[j], "{} vs {}", scores[i], scores[j]);
                }
            }
        }
    }

    #[test]
    fn ranking_invariant_under_temperature(q in distinct_scores(25), tau in 0.1f64..10.0) {
        let space = ClusterSpace::new((0..q.len()).map(|i| format!("c{i}"))).unwrap();
        let d = PreferenceDistribution::from_scores(&space, &q, tau).unwrap();
        let (a, b) = (rank_descending(&d), rank_scores(&q));
        prop_assert_eq!(a.order(), b.order());
    }

    #[test]
    fn unit_weight_proxy_is_count_over_total(
        window in proptest::collection::vec(proptest::collection::btree_set(0usize..6, 1..4), 1..40),
    ) {
        let space = ClusterSpace::new(["a", "b", "c", "d", "e", "f"]).unwrap();
        let lists: Vec<Vec<usize>> = window.iter().map(|s| s.iter().copied().collect()).collect();
        let d = empirical_proxy(lists.iter().map(|c| (c.as_slice(), 1.0)), &space).unwrap();
        let mut counts = [0u64; 6];
        for c in &lists {
            for &i in c {
                counts[i] += 1;
            }
        }
        let total: u64 = counts.iter().sum();
        for i in 0..6 {
            prop_assert_eq!(d.probs()[i], counts[i] as f64 / total as f64);
        }
    }

    #[test]
    fn argsort_breaks_ties_by_index(values in proptest::collection::vec(0u8..4, 1..20)) {
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        let order = argsort_descending(&v);
        for w in order.windows(2) {
            prop_assert!(v[w[0]] > v[w[1]] || (v[w[0]] == v[w[1]] && w[0] < w[1]));
        }
    }
}
