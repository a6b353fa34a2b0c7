//! Direct-generation baseline: ask for a lettered top-k list and parse it.
//! The oracle emits the true order with random adjacent swaps.

use prefprobe::metrics::ndcg_at_k;
use prefprobe::probing::{direct_generate_ranking, parse_letter_ranking, ProbeConfig};
use prefprobe::providers::{ChoiceAlphabet, OracleConfig, SyntheticOracle};
use prefprobe::{ClusterSpace, Horizon, LatentUtility};

fn main() -> prefprobe::Result<()> {
    let space = ClusterSpace::new([
        "A-cluster",
        "B-cluster",
        "C-cluster",
        "D-cluster",
        "E-cluster",
    ])?;
    let q = LatentUtility::new(&space, vec![0.1, 2.0, -0.4, 1.1, 0.6])?;
    let gains = q.preference().probs().to_vec();
    let cfg = ProbeConfig::new(Horizon::LongTerm);
    for p_swap in [0.0, 0.3, 0.8] {
        let oracle = SyntheticOracle::new(OracleConfig::new(q.clone(), 9).with_swap(p_swap))?;
        let (ranking, _) = direct_generate_ranking(&oracle, "Time 1: ...", &space, 3, &cfg)?;
        println!(
            "p_swap={p_swap}: top-3 {:?}, NDCG@3 {:.4}",
            ranking.order(),
            ndcg_at_k(&ranking, &gains, 3)?
        );
    }
    let parsed = parse_letter_ranking("B) ... then D, and E", &ChoiceAlphabet::default(), 5, 3)?;
    println!("parsed free text -> {parsed:?}");
    Ok(())
}
