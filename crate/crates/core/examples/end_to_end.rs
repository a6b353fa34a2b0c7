//! Full experiment in one go: simulate a corpus with known utilities, probe
//! every user with two methods, and evaluate against the held-out window.

use prefprobe::harness::{cmd_evaluate, cmd_probe, cmd_simulate, ExperimentConfig};

const CONFIG: &str = r#"
seed = 42
k_list = [1, 5, 10]
max_concurrency = 4

[space]
clusters = "data/clusters.txt"

[simulate]
users = 40
k = 12

[data]
corpus = "data/corpus.jsonl"
truth = "data/truth.jsonl"

[provider]
noise_sigma = 0.1
p_swap = 0.1
"#;

fn main() -> prefprobe::Result<()> {
    let dir = tempfile::tempdir()?;
    let load = |extra: &[&str]| {
        let o: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        ExperimentConfig::from_toml(CONFIG, &o, Some(dir.path()))
    };
    let sim = cmd_simulate(&load(&["output_dir=\"data\""])?)?;
    println!(
        "simulated {} interactions for {} users",
        sim.interactions, sim.users
    );

    for method in ["likelihood", "generative", "direct"] {
        let m = format!("method=\"{method}\"");
        let out = format!("output_dir=\"{method}\"");
        let cfg = load(&[&m, &out])?;
        let s = cmd_probe(&cfg, None)?;
        let (report, _) = cmd_evaluate(&cfg, None, None)?;
        let g = &report.groups[0].metrics;
        println!(
            "{method:<10} NDCG@1 {:.3}  NDCG@5 {:.3}  NDCG@10 {:.3}  calls {}",
            g.ndcg[&1], g.ndcg[&5], g.ndcg[&10], s.provider_calls
        );
    }
    Ok(())
}
