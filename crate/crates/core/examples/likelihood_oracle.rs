//! Per-cluster yes/no probing against a synthetic oracle with known
//! utilities, with and without noise.

use prefprobe::probing::{likelihood_probe, ProbeConfig};
use prefprobe::providers::{OracleConfig, SyntheticOracle};
use prefprobe::{rank_descending, ClusterSpace, Horizon, LatentUtility};

fn main() -> prefprobe::Result<()> {
    let space = ClusterSpace::new(["Action", "Comedy", "Drama", "Horror", "Sci-Fi"])?;
    let q = LatentUtility::new(&space, vec![1.2, -0.3, 0.4, -1.5, 2.0])?;
    let history =
        "Time 1: rated \"Alien\" 5/5 (Horror, Sci-Fi);\nTime 2: rated \"Heat\" 4/5 (Action)";
    println!("true order {:?}", rank_descending(&q.preference()).order());

    for sigma in [0.0, 0.5, 2.0] {
        let oracle = SyntheticOracle::new(OracleConfig::new(q.clone(), 7).with_noise(sigma))?;
        let cfg = ProbeConfig::new(Horizon::LongTerm).with_concurrency(4);
        let (theta, trace) = likelihood_probe(&oracle, history, &space, &cfg)?;
        println!(
            "sigma={sigma}: order {:?}, {} calls, theta {:.3?}",
            rank_descending(&theta).order(),
            trace.calls,
            theta.probs()
        );
    }
    Ok(())
}
