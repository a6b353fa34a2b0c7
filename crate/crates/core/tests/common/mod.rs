#![allow(dead_code)]

use prefprobe::metrics::{MetricKind, RecallDenominator};
use prefprobe::providers::{OracleConfig, SyntheticOracle};
use prefprobe::{ClusterSpace, LatentUtility};

pub fn space(k: usize) -> ClusterSpace {
    ClusterSpace::new((0..k).map(|i| format!("c{i}"))).unwrap()
}

pub fn oracle(q: &[f64], seed: u64) -> SyntheticOracle {
    let space = space(q.len());
    SyntheticOracle::new(OracleConfig::new(
        LatentUtility::new(&space, q.to_vec()).unwrap(),
        seed,
    ))
    .unwrap()
}

/// Straight-from-the-definition metric, independent of the library code.
pub fn reference_score(
    order: &[usize],
    gains: &[f64],
    relevant: &[bool],
    k: usize,
    metric: MetricKind,
) -> f64 {
    let top = &order[..k.min(order.len())];
    match metric {
        MetricKind::Ndcg => {
            let dcg: f64 = top
                .iter()
                .enumerate()
                .map(|(i, &c)| gains[c] / ((i + 2) as f64).log2())
                .sum();
            let mut sorted = gains.to_vec();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let idcg: f64 = sorted
                .iter()
                .take(k)
                .enumerate()
                .map(|(i, g)| g / ((i + 2) as f64).log2())
                .sum();
            if idcg == 0.0 {
                0.0
            } else {
                dcg / idcg
            }
        }
        MetricKind::Precision => top.iter().filter(|&&c| relevant[c]).count() as f64 / k as f64,
        MetricKind::Recall(d) => {
            let hits = top.iter().filter(|&&c| relevant[c]).count() as f64;
            match d {
                RecallDenominator::ClusterCount => hits / relevant.len() as f64,
                RecallDenominator::StandardR => {
                    hits / relevant.iter().filter(|&&r| r).count() as f64
                }
            }
        }
    }
}

/// Every permutation of `0..n`, by recursive insertion.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn reference_best(gains: &[f64], relevant: &[bool], k: usize, metric: MetricKind) -> f64 {
    all_permutations(gains.len())
        .iter()
        .map(|p| reference_score(p, gains, relevant, k, metric))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn random_simplex(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

use std::sync::atomic::{AtomicUsize, Ordering};

use prefprobe::providers::{Generation, LogitResponse, ProbeIntent, Provider};

/// Passes calls through and counts them.
pub struct Counting<P> {
    pub inner: P,
    pub logit_calls: AtomicUsize,
    pub generate_calls: AtomicUsize,
}

impl<P> Counting<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            logit_calls: AtomicUsize::new(0),
            generate_calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.logit_calls.load(Ordering::SeqCst) + self.generate_calls.load(Ordering::SeqCst)
    }
}

impl<P: Provider> Provider for Counting<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn raw_logits(
        &self,
        prompt: &str,
        watch: &[String],
        intent: &ProbeIntent,
    ) -> prefprobe::Result<LogitResponse> {
        self.logit_calls.fetch_add(1, Ordering::SeqCst);
        self.inner.raw_logits(prompt, watch, intent)
    }

    fn generate(
        &self,
        prompt: &str,
        max_tokens: usize,
        intent: &ProbeIntent,
    ) -> prefprobe::Result<Generation> {
        self.generate_calls.fetch_add(1, Ordering::SeqCst);
        self.inner.generate(prompt, max_tokens, intent)
    }
}

/// `n` distinct utilities spread over [-10, 10] in a shuffled order.
pub fn distinct_utilities(n: usize, perm: &[usize], jitter: f64) -> Vec<f64> {
    let step = 20.0 / n as f64;
    perm.iter()
        .map(|&r| -10.0 + step * (r as f64 + 0.5) + jitter * step * 0.4)
        .collect()
}

use std::path::Path;

use prefprobe::harness::{cmd_simulate, ExperimentConfig};

/// Base experiment over a simulated corpus living in `dir/data`.
pub const SIM_BASE: &str = r#"
seed = 11
output_dir = "run"
k_list = [1, 5, 10]

[space]
clusters = "data/clusters.txt"

[simulate]
users = 50
days = 10
interactions_per_day = 4
k = 19

[data]
corpus = "data/corpus.jsonl"
truth = "data/truth.jsonl"

[provider]
kind = "oracle"
noise_sigma = 0.25
"#;

pub fn config(dir: &Path, overrides: &[&str]) -> ExperimentConfig {
    let owned: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::from_toml(SIM_BASE, &owned, Some(dir)).unwrap()
}

/// Simulates the corpus for `config(dir, overrides)` into `dir/data`.
pub fn simulate(dir: &Path, overrides: &[&str]) {
    let mut o = overrides.to_vec();
    o.push("output_dir=\"data\"");
    cmd_simulate(&config(dir, &o)).unwrap();
}

pub fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref())
        .unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}
