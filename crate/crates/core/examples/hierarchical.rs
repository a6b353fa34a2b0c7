//! Two-level probing over a business taxonomy: score the top level, then
//! only the children of the chosen branches.

use prefprobe::probing::{hierarchical_probe, BranchStrategy, CombineMode, ProbeConfig, Taxonomy};
use prefprobe::providers::{OracleConfig, SyntheticOracle};
use prefprobe::{ClusterSpace, Horizon, LatentUtility};

const TAXONOMY: &str = r#"{
  "Restaurants": ["Sushi Bars", "Pizza", "Burgers"],
  "Nightlife": ["Cocktail Bars", "Dance Clubs"],
  "Shopping": ["Bookstores", "Vintage"]
}"#;

fn main() -> prefprobe::Result<()> {
    let l2 = ClusterSpace::new([
        "Sushi Bars",
        "Pizza",
        "Burgers",
        "Cocktail Bars",
        "Dance Clubs",
        "Bookstores",
        "Vintage",
    ])?;
    let taxonomy = Taxonomy::from_json(TAXONOMY, &l2)?;
    let q = LatentUtility::new(&l2, vec![1.5, 0.2, -0.5, 0.9, -1.2, 0.3, 0.1])?;
    let oracle =
        SyntheticOracle::new(OracleConfig::new(q, 3).with_branch_utility(vec![1.0, 0.2, -0.4]))?;
    let cfg = ProbeConfig::new(Horizon::LongTerm);
    let history = "Time 1: reviewed \"Umi\" 5/5 (Sushi Bars)";
    for strategy in [
        BranchStrategy::All,
        BranchStrategy::TopB { b: 1 },
        BranchStrategy::Threshold { p_min: 0.3 },
    ] {
        let (theta, trace) = hierarchical_probe(
            &oracle,
            history,
            &taxonomy,
            strategy,
            CombineMode::SumNormalize,
            &cfg,
        )?;
        println!(
            "{strategy:?}: branches {:?}, {} calls ({} + {}), theta {:.3?}",
            trace.selected_branches.unwrap_or_default(),
            trace.calls,
            trace.l1_calls.unwrap_or(0),
            trace.l2_calls.unwrap_or(0),
            theta.probs()
        );
    }
    Ok(())
}
