//! Likelihood probing against a completion endpoint that returns top
//! logprobs. Set `PREFPROBE_URL` (and optionally `PREFPROBE_MODEL`,
//! `PREFPROBE_KEY_ENV`) to run it.

use prefprobe::probing::{likelihood_probe, ProbeConfig};
use prefprobe::providers::{HttpConfig, HttpProvider, TokenSet};
use prefprobe::{rank_descending, ClusterSpace, Horizon};

fn main() -> prefprobe::Result<()> {
    let Ok(url) = std::env::var("PREFPROBE_URL") else {
        eprintln!("set PREFPROBE_URL to a /v1/completions endpoint");
        return Ok(());
    };
    let provider = HttpProvider::new(HttpConfig {
        url,
        model: std::env::var("PREFPROBE_MODEL").ok(),
        api_key_env: std::env::var("PREFPROBE_KEY_ENV").ok(),
        ..HttpConfig::default()
    })?;
    let space = ClusterSpace::new(["Action", "Comedy", "Drama", "Horror", "Romance"])?;
    let mut cfg = ProbeConfig::new(Horizon::LongTerm).with_concurrency(5);
    // leading-space variants matter for most BPE vocabularies
    cfg.tokens = TokenSet::new([" Yes", "Yes", " yes"], [" No", "No", " no"])?;
    let history = "Time 1: rated \"The Notebook\" 5/5 (Drama, Romance);\nTime 2: rated \"Alien\" 2/5 (Horror)";
    let (theta, trace) = likelihood_probe(&provider, history, &space, &cfg)?;
    println!("theta {:.3?}", theta.probs());
    println!(
        "order {:?}, {} calls, {} prompt tokens",
        rank_descending(&theta).order(),
        trace.calls,
        trace.prompt_tokens_total
    );
    if trace.floored_count() > 0 {
        println!(
            "{} watched tokens were missing from the top logprobs",
            trace.floored_count()
        );
    }
    Ok(())
}
