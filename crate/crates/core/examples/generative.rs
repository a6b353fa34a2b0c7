//! One-call multiple-choice classification: letter logits become the
//! distribution. Against a noiseless oracle this reproduces softmax(q).

use prefprobe::metrics::js_divergence;
use prefprobe::probing::{generative_classify, ProbeConfig};
use prefprobe::providers::{OracleConfig, SyntheticOracle};
use prefprobe::{ClusterSpace, Horizon, LatentUtility};

fn main() -> prefprobe::Result<()> {
    let space = ClusterSpace::new(["Jazz", "Rock", "Classical", "Hip-Hop", "Folk", "Electronic"])?;
    let q = LatentUtility::new(&space, vec![0.5, 1.5, -0.2, 0.0, -1.0, 0.8])?;
    let oracle = SyntheticOracle::new(OracleConfig::new(q.clone(), 1))?;
    let cfg = ProbeConfig::new(Horizon::ShortTerm);
    let (theta, trace) = generative_classify(&oracle, "Time 1: played a rock album", &space, &cfg)?;
    println!("theta   {:.4?}", theta.probs());
    println!("softmax {:.4?}", q.preference().probs());
    println!(
        "JS divergence {:e}, {} call",
        js_divergence(&theta, &q.preference())?,
        trace.calls
    );
    Ok(())
}
