//! Record provider responses to a JSONL cache, then rerun offline from it.

use prefprobe::probing::{likelihood_probe, ProbeConfig};
use prefprobe::providers::{OracleConfig, RecordingProvider, ReplayProvider, SyntheticOracle};
use prefprobe::{ClusterSpace, Horizon, LatentUtility};

fn main() -> prefprobe::Result<()> {
    let dir = tempfile::tempdir()?;
    let cache = dir.path().join("cache.jsonl");
    let space = ClusterSpace::new(["Pop", "Metal", "Blues"])?;
    let q = LatentUtility::new(&space, vec![0.4, -0.8, 1.1])?;
    let cfg = ProbeConfig::new(Horizon::LongTerm);
    let history = "Time 1: listened to \"Crossroads\" (Blues)";

    let live = RecordingProvider::open(
        SyntheticOracle::new(OracleConfig::new(q, 2).with_noise(0.3))?,
        &cache,
    )?;
    let (recorded, _) = likelihood_probe(&live, history, &space, &cfg)?;
    drop(live);

    let replay = ReplayProvider::open(&cache)?;
    let (replayed, _) = likelihood_probe(&replay, history, &space, &cfg)?;
    println!("{} cached responses", replay.len());
    println!(
        "recorded {:?}\nreplayed {:?}",
        recorded.probs(),
        replayed.probs()
    );
    assert_eq!(recorded, replayed);

    match likelihood_probe(&replay, "an unseen history", &space, &cfg) {
        Err(e) => println!("unseen prompt: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
