//! Ranking metrics, JS divergence and the exhaustive optimality check:
//! ranking by any order-preserving estimate of the utilities scores as well
//! as the best permutation.

use prefprobe::metrics::{
    brute_force_best, js_divergence_raw, score, MetricKind, RecallDenominator,
};
use prefprobe::simplex::rank_scores;
use prefprobe::softmax;

fn main() -> prefprobe::Result<()> {
    let q = [0.3, -1.0, 1.7, 0.8, -0.2];
    let gains = softmax(&q, 1.0)?;
    let relevant: Vec<bool> = gains.iter().map(|&g| g > 1.0 / q.len() as f64).collect();
    // any strictly increasing transform keeps the ranking
    let estimate: Vec<f64> = q.iter().map(|u| 1.0 / (1.0 + (-u).exp())).collect();
    let ranking = rank_scores(&estimate);
    for kind in [
        MetricKind::Ndcg,
        MetricKind::Precision,
        MetricKind::Recall(RecallDenominator::ClusterCount),
        MetricKind::Recall(RecallDenominator::StandardR),
    ] {
        for k in 1..=q.len() {
            let got = score(&ranking, &gains, &relevant, k, kind)?;
            let (best, _) = brute_force_best(&gains, &relevant, k, kind)?;
            assert!((got - best).abs() < 1e-12);
            print!("{kind:?}@{k}={got:.3} ");
        }
        println!();
    }
    let p = [0.7, 0.2, 0.1];
    let r = [0.1, 0.2, 0.7];
    println!("JS(p, r) = {:.6} bits", js_divergence_raw(&p, &r));
    Ok(())
}
