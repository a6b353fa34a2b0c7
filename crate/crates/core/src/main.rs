use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prefprobe::harness::{
    cmd_certify_lemma, cmd_evaluate, cmd_export_sft, cmd_probe, cmd_report_evolution, cmd_simulate,
    error_exit_code, ExperimentConfig, Outcome,
};
use prefprobe::Result;

#[derive(Parser)]
#[command(
    name = "prefprobe",
    version,
    about = "Preference-distribution probing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set provider.noise_sigma=0.25`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    horizon: Option<String>,
}

impl Common {
    fn load(&self, extra: Vec<String>) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        let mut push = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push(format!("{key}={v}"));
            }
        };
        push("seed", self.seed.map(|s| s.to_string()));
        push("method", self.method.as_ref().map(|m| format!("{m:?}")));
        push(
            "output_dir",
            self.output_dir
                .as_ref()
                .map(|p| format!("{:?}", p.display().to_string())),
        );
        push("max_concurrency", self.concurrency.map(|c| c.to_string()));
        push("tau", self.tau.map(|t| t.to_string()));
        push("horizon", self.horizon.as_ref().map(|h| format!("{h:?}")));
        overrides.extend(extra);
        match &self.config {
            Some(path) => ExperimentConfig::load(path, &overrides),
            None => ExperimentConfig::from_toml("", &overrides, None),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known latent utilities.
    Simulate(Common),
    /// Infer a preference distribution for every evaluation sample.
    Probe(Common),
    /// Score probe output against the held-out labels.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        probe: Option<PathBuf>,
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Compare probed rankings with the brute-force optimum.
    CertifyLemma {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        /// Negative control: the oracle sees negated utilities.
        #[arg(long)]
        anti_isotonic: bool,
    },
    /// Group-level preference drift over equal time periods.
    ReportEvolution {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        periods: Option<usize>,
    },
    /// Write (history, label) pairs for fine-tuning.
    ExportSft(Common),
    /// Probe and append every provider response to a cache file.
    Record {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cache: PathBuf,
    },
    /// Probe using only responses from a cache file.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cache: PathBuf,
    },
}

fn quoted(p: &std::path::Path) -> String {
    format!("{:?}", p.display().to_string())
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate(c) => {
            let s = cmd_simulate(&c.load(vec![])?)?;
            println!(
                "simulated {} users, {} interactions -> {}",
                s.users,
                s.interactions,
                s.corpus.display()
            );
            Ok(Outcome::Success)
        }
        Command::Probe(c) => probe(&c.load(vec![])?, None),
        Command::Record { common, cache } => {
            let cfg = common.load(vec![])?;
            probe(&cfg, Some(&cache))
        }
        Command::Replay { common, cache } => {
            let cfg = common.load(vec![
                "provider.kind=\"replay\"".into(),
                format!("provider.cache={}", quoted(&cache)),
            ])?;
            probe(&cfg, None)
        }
        Command::Evaluate {
            common,
            probe,
            samples,
        } => {
            let cfg = common.load(vec![])?;
            let (report, outcome) = cmd_evaluate(&cfg, probe.as_deref(), samples.as_deref())?;
            for g in &report.groups {
                let m = &g.metrics;
                let fmt = |map: &std::collections::BTreeMap<usize, f64>| {
                    map.iter()
                        .map(|(k, v)| format!("@{k}={v:.4}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                println!(
                    "{} {} n={} ndcg {} | precision {} | recall {}{}",
                    g.method.as_str(),
                    g.horizon.as_str(),
                    m.n_samples,
                    fmt(&m.ndcg),
                    fmt(&m.precision),
                    fmt(&m.recall),
                    m.js_div
                        .map_or(String::new(), |j| format!(" | js_div {j:.6}"))
                );
            }
            println!(
                "provider calls {}, failed {}, skipped {}",
                report.totals.provider_calls, report.n_failed, report.n_skipped
            );
            Ok(outcome)
        }
        Command::CertifyLemma {
            common,
            k,
            trials,
            anti_isotonic,
        } => {
            let mut extra = Vec::new();
            if let Some(k) = k {
                extra.push(format!("certify.k={k}"));
            }
            if let Some(t) = trials {
                extra.push(format!("certify.trials={t}"));
            }
            if anti_isotonic {
                extra.push("certify.anti_isotonic=true".into());
            }
            let (r, outcome) = cmd_certify_lemma(&common.load(extra)?)?;
            println!(
                "K={} trials={} passed={} failed={}",
                r.k, r.trials, r.passed, r.failed
            );
            Ok(outcome)
        }
        Command::ReportEvolution { common, periods } => {
            let extra = periods
                .map(|p| format!("evolution.periods={p}"))
                .into_iter()
                .collect();
            let cfg = common.load(extra)?;
            let m = cmd_report_evolution(&cfg)?;
            println!(
                "{} periods x {} clusters -> {}",
                m.rows.len(),
                m.rows.first().map_or(0, Vec::len),
                cfg.output_dir.join("evolution.csv").display()
            );
            Ok(Outcome::Success)
        }
        Command::ExportSft(c) => {
            let cfg = c.load(vec![])?;
            let n = cmd_export_sft(&cfg)?;
            println!(
                "{n} pairs -> {}",
                cfg.output_dir.join("sft.jsonl").display()
            );
            Ok(Outcome::Success)
        }
    }
}

fn probe(cfg: &ExperimentConfig, record: Option<&std::path::Path>) -> Result<Outcome> {
    let s = cmd_probe(cfg, record)?;
    println!(
        "{} rows ({} resumed), {} failed, {} skipped, {} provider calls",
        s.rows, s.resumed, s.failures, s.skipped, s.provider_calls
    );
    Ok(s.outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
