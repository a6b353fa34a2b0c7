//! Exhaustive check that ranking by probed likelihood is optimal for every
//! metric when the estimator preserves the order of the true utilities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::{write_json, Outcome};
use crate::error::{Error, Result};
use crate::metrics::{brute_force_best, score, MetricKind, RecallDenominator};
use crate::probing::{likelihood_probe, ProbeConfig};
use crate::providers::{OracleConfig, SyntheticOracle};
use crate::simplex::{rank_descending, softmax, ClusterSpace, LatentUtility};

const TOLERANCE: f64 = 1e-12;
const KEPT_FAILURES: usize = 20;

const METRICS: [MetricKind; 4] = [
    MetricKind::Ndcg,
    MetricKind::Precision,
    MetricKind::Recall(RecallDenominator::ClusterCount),
    MetricKind::Recall(RecallDenominator::StandardR),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyFailure {
    pub trial: usize,
    pub metric: MetricKind,
    pub k: usize,
    pub got: f64,
    pub best: f64,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub config_digest: String,
    pub k: usize,
    pub trials: usize,
    pub anti_isotonic: bool,
    /// Relevance cut for precision and recall: `softmax(q)[i] > 1/K`.
    pub relevance_threshold: f64,
    pub passed: usize,
    pub failed: usize,
    /// Metric comparisons made across all trials.
    pub comparisons: usize,
    /// The first few failing comparisons.
    pub failures: Vec<CertifyFailure>,
}

pub fn cmd_certify_lemma(cfg: &ExperimentConfig) -> Result<(CertifyReport, Outcome)> {
    cfg.validate_certify()?;
    let c = &cfg.certify;
    let k = c.k;
    let seed = cfg.require_seed()?;
    let space = ClusterSpace::new((1..=k).map(|i| format!("c{i}")))?;
    let normal = Normal::new(0.0, c.utility_scale).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pcfg = ProbeConfig::new(cfg.horizon);
    let threshold = 1.0 / k as f64;

    let mut report = CertifyReport {
        config_digest: cfg.digest(),
        k,
        trials: c.trials,
        anti_isotonic: c.anti_isotonic,
        relevance_threshold: threshold,
        passed: 0,
        failed: 0,
        comparisons: 0,
        failures: Vec::new(),
    };
    for trial in 0..c.trials {
        let q: Vec<f64> = (0..k).map(|_| normal.sample(&mut rng)).collect();
        let seen: Vec<f64> = if c.anti_isotonic {
            q.iter().map(|v| -v).collect()
        } else {
            q.clone()
        };
        let oracle =
            SyntheticOracle::new(OracleConfig::new(LatentUtility::new(&space, seen)?, seed))?;
        let history = format!("Time 1: certification trial {trial}");
        let (theta, _) = likelihood_probe(&oracle, &history, &space, &pcfg)?;
        let ranking = rank_descending(&theta);
        let gains = softmax(&q, 1.0)?;
        let relevant: Vec<bool> = gains.iter().map(|&g| g > threshold).collect();
        let mut ok = true;
        for metric in METRICS {
            for cut in 1..=k {
                let got = score(&ranking, &gains, &relevant, cut, metric)?;
                let (best, _) = brute_force_best(&gains, &relevant, cut, metric)?;
                report.comparisons += 1;
                if (got - best).abs() > TOLERANCE {
                    ok = false;
                    if report.failures.len() < KEPT_FAILURES {
                        report.failures.push(CertifyFailure {
                            trial,
                            metric,
                            k: cut,
                            got,
                            best,
                            q: q.clone(),
                        });
                    }
                }
            }
        }
        if ok {
            report.passed += 1;
        } else {
            report.failed += 1;
        }
    }
    write_json(&cfg.output_dir.join("certification.json"), &report)?;
    let outcome = if report.failed == 0 {
        Outcome::Success
    } else {
        Outcome::CertificationFailed {
            failures: report.failed,
        }
    };
    Ok((report, outcome))
}
