//! Resumable per-user probing.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, LabelSource, ProviderKind, RunPolicy};
use super::simulate::TruthTable;
use super::{write_json, Outcome, Timing};
use crate::dataset::{
    build_eval_samples, export_sft_pairs, group_by_user, ingest, render_history, write_lines,
    EvalSample, Reject, Skipped, SECONDS_PER_DAY,
};
use crate::error::{Error, Result};
use crate::probing::{
    direct_generate_ranking, generative_classify, hierarchical_probe, likelihood_probe, par_map,
    Method, ProbeConfig, ProbeTrace, Taxonomy,
};
use crate::providers::{
    CacheSink, HttpProvider, OracleConfig, Provider, RecordingProvider, ReplayProvider,
    SyntheticOracle,
};
use crate::simplex::{rank_descending, ClusterSpace, LatentUtility};
use crate::Horizon;

/// One evaluation sample as written to `samples.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub user_id: String,
    pub horizon: Horizon,
    pub context_sessions: usize,
    pub context_records: usize,
    pub label_start: i64,
    pub label_count: usize,
    pub label: Vec<f64>,
}

impl From<&EvalSample> for SampleRow {
    fn from(s: &EvalSample) -> Self {
        Self {
            user_id: s.user_id.clone(),
            horizon: s.horizon,
            context_sessions: s.context.len(),
            context_records: s.context.iter().map(|x| x.records.len()).sum(),
            label_start: s.label_start,
            label_count: s.label_count,
            label: s.label.probs().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub config_digest: String,
    pub user_id: String,
    pub method: Method,
    pub horizon: Horizon,
    /// Inferred distribution; absent for direct generation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    pub ranking: Vec<usize>,
    pub trace: ProbeTrace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRow {
    pub config_digest: String,
    pub user_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSummary {
    pub rows: usize,
    pub failures: usize,
    pub skipped: usize,
    pub rejects: usize,
    /// Users taken from the checkpoint instead of probed again.
    pub resumed: usize,
    pub provider_calls: usize,
    pub prompt_tokens: u64,
    pub outcome: Outcome,
}

/// Ingests the corpus and builds evaluation samples, applying `max_samples`.
pub fn load_samples(
    cfg: &ExperimentConfig,
    space: &ClusterSpace,
) -> Result<(Vec<EvalSample>, Vec<Skipped>, Vec<Reject>)> {
    let corpus = cfg.corpus_path()?;
    let ingested = ingest(corpus, cfg.data.format, &cfg.data.schema, space)?;
    let users = group_by_user(ingested.records);
    let set = build_eval_samples(
        &users,
        &cfg.split_spec(),
        cfg.split.session_rule,
        cfg.data.weighting,
        space,
    )?;
    let mut samples = set.samples;
    if cfg.data.label == LabelSource::Truth {
        let truth = TruthTable::read(cfg.data.truth.as_deref().expect("validated"))?;
        for s in &mut samples {
            let q = truth.at(&s.user_id, s.label_start.div_euclid(SECONDS_PER_DAY))?;
            s.label = LatentUtility::new(space, q.to_vec())?.preference();
        }
    }
    if let Some(m) = cfg.max_samples {
        if m == 0 {
            return Err(Error::Config("max_samples must be >= 1".into()));
        }
        if m < samples.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
            let mut keep = rand::seq::index::sample(&mut rng, samples.len(), m).into_vec();
            keep.sort_unstable();
            let mut all: Vec<Option<EvalSample>> = samples.into_iter().map(Some).collect();
            samples = keep
                .into_iter()
                .map(|i| all[i].take().expect("unique"))
                .collect();
        }
    }
    Ok((samples, set.skipped, ingested.rejects))
}

enum Source {
    Oracle {
        truth: TruthTable,
        sink: Option<Arc<CacheSink>>,
    },
    Shared(Box<dyn Provider>),
}

fn logsumexp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Source {
    fn open(cfg: &ExperimentConfig, record: Option<&Path>) -> Result<Self> {
        let sink = record.map(CacheSink::open).transpose()?.map(Arc::new);
        Ok(match cfg.provider.kind {
            ProviderKind::Oracle => Source::Oracle {
                truth: TruthTable::read(cfg.data.truth.as_deref().expect("validated"))?,
                sink,
            },
            ProviderKind::Http => {
                let http = HttpProvider::new(cfg.provider.http.clone())?;
                match sink {
                    Some(s) => Source::Shared(Box::new(RecordingProvider::new(http, s))),
                    None => Source::Shared(Box::new(http)),
                }
            }
            ProviderKind::Replay => {
                if sink.is_some() {
                    return Err(Error::Config(
                        "cannot record from the replay provider".into(),
                    ));
                }
                let cache = cfg.provider.cache.as_deref().expect("validated");
                Source::Shared(Box::new(ReplayProvider::open(cache)?))
            }
        })
    }

    fn for_sample<'a>(
        &'a self,
        cfg: &ExperimentConfig,
        space: &ClusterSpace,
        taxonomy: Option<&Taxonomy>,
        sample: &EvalSample,
    ) -> Result<Box<dyn Provider + 'a>> {
        match self {
            Source::Shared(p) => Ok(Box::new(&**p)),
            Source::Oracle { truth, sink } => {
                let day = sample.label_start.div_euclid(SECONDS_PER_DAY);
                let q = truth.at(&sample.user_id, day)?.to_vec();
                let mut oc = OracleConfig::new(
                    LatentUtility::new(space, q.clone())?,
                    cfg.seed.expect("validated"),
                )
                .with_noise(cfg.provider.noise_sigma)
                .with_swap(cfg.provider.p_swap);
                oc.negative_baseline = cfg.provider.negative_baseline;
                oc.tokens = cfg.probe_config()?.tokens;
                if let Some(tax) = taxonomy {
                    let branch = (0..tax.k1())
                        .map(|j| logsumexp(tax.children(j).iter().map(|&c| q[c])))
                        .collect();
                    oc = oc.with_branch_utility(branch);
                }
                let oracle = SyntheticOracle::new(oc)?;
                Ok(match sink {
                    Some(s) => Box::new(RecordingProvider::new(oracle, s.clone())),
                    None => Box::new(oracle),
                })
            }
        }
    }
}

fn probe_one(
    cfg: &ExperimentConfig,
    pcfg: &ProbeConfig,
    space: &ClusterSpace,
    taxonomy: Option<&Taxonomy>,
    provider: &dyn Provider,
    sample: &EvalSample,
    digest: &str,
) -> Result<ProbeRow> {
    let history = render_history(&sample.context, space, cfg.data.history_style);
    let (theta, ranking, trace) = match cfg.method {
        Method::Likelihood => {
            let (d, t) = likelihood_probe(provider, &history, space, pcfg)?;
            (Some(d.probs().to_vec()), rank_descending(&d), t)
        }
        Method::Generative => {
            let (d, t) = generative_classify(provider, &history, space, pcfg)?;
            (Some(d.probs().to_vec()), rank_descending(&d), t)
        }
        Method::Hierarchical => {
            let tax = taxonomy.expect("validated");
            let (d, t) =
                hierarchical_probe(provider, &history, tax, cfg.branch, cfg.combine, pcfg)?;
            (Some(d.probs().to_vec()), rank_descending(&d), t)
        }
        Method::Direct => {
            let k = *cfg.k_list.last().expect("validated");
            let (r, t) = direct_generate_ranking(provider, &history, space, k, pcfg)?;
            (None, r, t)
        }
    };
    Ok(ProbeRow {
        config_digest: digest.to_string(),
        user_id: sample.user_id.clone(),
        method: cfg.method,
        horizon: sample.horizon,
        theta,
        ranking: ranking.order().to_vec(),
        trace,
    })
}

/// Reads completed rows for `digest`, dropping a torn final line. A
/// checkpoint written under another digest is discarded.
fn load_checkpoint(path: &Path, digest: &str) -> Result<HashMap<String, ProbeRow>> {
    let Ok(bytes) = std::fs::read(path) else {
        return Ok(HashMap::new());
    };
    let good = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let text = String::from_utf8_lossy(&bytes[..good]);
    let mut rows = HashMap::new();
    let mut stale = false;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: ProbeRow = serde_json::from_str(line).map_err(|e| Error::CacheCorrupt {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if row.config_digest != digest {
            stale = true;
            break;
        }
        rows.insert(row.user_id.clone(), row);
    }
    let keep = if stale {
        rows.clear();
        0
    } else {
        good
    };
    let f = std::fs::OpenOptions::new().write(true).open(path)?;
    f.set_len(keep as u64)?;
    Ok(rows)
}

enum Status {
    Done(Box<ProbeRow>),
    Failed(FailureRow, Error),
    NotRun,
}

/// Probes every evaluation sample. With `record` set, every provider
/// response is also appended to that cache file.
pub fn cmd_probe(cfg: &ExperimentConfig, record: Option<&Path>) -> Result<ProbeSummary> {
    let started = Instant::now();
    let space = cfg.space()?;
    cfg.validate_run(&space)?;
    let taxonomy = match cfg.method {
        Method::Hierarchical => cfg.taxonomy(&space)?,
        _ => None,
    };
    let pcfg = cfg.probe_config()?;
    let digest = cfg.digest();
    let (samples, skipped, rejects) = load_samples(cfg, &space)?;

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    write_lines(
        &dir.join("samples.jsonl"),
        &samples.iter().map(SampleRow::from).collect::<Vec<_>>(),
    )?;
    write_lines(&dir.join("skipped.jsonl"), &skipped)?;
    write_lines(&dir.join("rejects.jsonl"), &rejects)?;

    let source = Source::open(cfg, record)?;
    let ckpt_path = dir.join("probe.checkpoint.jsonl");
    let done = load_checkpoint(&ckpt_path, &digest)?;
    let ckpt = Mutex::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&ckpt_path)?,
    );
    let pending: Vec<usize> = (0..samples.len())
        .filter(|&i| !done.contains_key(&samples[i].user_id))
        .collect();

    let stop = AtomicBool::new(false);
    let completed = AtomicUsize::new(0);
    let statuses = par_map(&pending, cfg.max_concurrency, |&i| {
        if stop.load(Ordering::SeqCst) {
            return Status::NotRun;
        }
        let sample = &samples[i];
        let result = source
            .for_sample(cfg, &space, taxonomy.as_ref(), sample)
            .and_then(|p| probe_one(cfg, &pcfg, &space, taxonomy.as_ref(), &*p, sample, &digest))
            .and_then(|row| {
                let mut line = serde_json::to_string(&row)?;
                line.push('\n');
                let mut f = ckpt.lock().expect("checkpoint poisoned");
                f.write_all(line.as_bytes())?;
                f.flush()?;
                Ok(row)
            });
        match result {
            Ok(row) => {
                let n = completed.fetch_add(1, Ordering::SeqCst) + 1;
                if cfg.interrupt_after.is_some_and(|limit| n >= limit) {
                    stop.store(true, Ordering::SeqCst);
                }
                Status::Done(Box::new(row))
            }
            Err(e) => {
                if cfg.on_error == RunPolicy::Abort {
                    stop.store(true, Ordering::SeqCst);
                }
                Status::Failed(
                    FailureRow {
                        config_digest: digest.clone(),
                        user_id: sample.user_id.clone(),
                        error: e.to_string(),
                    },
                    e,
                )
            }
        }
    });

    let mut fresh: HashMap<usize, ProbeRow> = HashMap::new();
    let mut failures = Vec::new();
    let mut not_run = 0usize;
    let mut first_error = None;
    for (&i, status) in pending.iter().zip(statuses) {
        match status {
            Status::Done(row) => {
                fresh.insert(i, *row);
            }
            Status::Failed(row, e) => {
                failures.push(row);
                first_error.get_or_insert(e);
            }
            Status::NotRun => not_run += 1,
        }
    }
    if cfg.on_error == RunPolicy::Abort {
        if let Some(e) = first_error {
            return Err(e);
        }
    }
    if not_run > 0 {
        return Err(Error::Interrupted(completed.load(Ordering::SeqCst)));
    }

    let resumed = done.len();
    let mut done = done;
    let rows: Vec<ProbeRow> = (0..samples.len())
        .filter_map(|i| {
            fresh
                .remove(&i)
                .or_else(|| done.remove(&samples[i].user_id))
        })
        .collect();
    write_lines(&dir.join("probe.jsonl"), &rows)?;
    write_lines(&dir.join("probe_failures.jsonl"), &failures)?;

    let provider_calls = rows.iter().map(|r| r.trace.calls).sum();
    let prompt_tokens = rows.iter().map(|r| r.trace.prompt_tokens_total).sum();
    write_json(
        &dir.join("timing.json"),
        &Timing {
            command: "probe",
            wall_clock_secs: started.elapsed().as_secs_f64(),
            provider_calls,
            prompt_tokens,
        },
    )?;
    let outcome = if failures.is_empty() {
        Outcome::Success
    } else {
        Outcome::Partial {
            failures: failures.len(),
        }
    };
    Ok(ProbeSummary {
        rows: rows.len(),
        failures: failures.len(),
        skipped: skipped.len(),
        rejects: rejects.len(),
        resumed,
        provider_calls,
        prompt_tokens,
        outcome,
    })
}

/// Writes `sft.jsonl` with one (history, label) pair per evaluation sample.
pub fn cmd_export_sft(cfg: &ExperimentConfig) -> Result<usize> {
    cfg.validate_common()?;
    let space = cfg.space()?;
    let (samples, _, _) = load_samples(cfg, &space)?;
    export_sft_pairs(
        &samples,
        cfg.output_dir.join("sft.jsonl"),
        cfg.data.history_style,
    )
}
