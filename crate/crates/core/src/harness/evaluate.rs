//! Joins probe output with samples and writes `report.json` / `rows.csv`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::probe::{FailureRow, ProbeRow, SampleRow};
use super::{read_jsonl, write_json, Outcome, Timing};
use crate::dataset::{cluster_masses, group_by_user, ingest, long_tail_segment, Skipped};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_sample, MetricSettings, MetricsReport, SampleMetrics};
use crate::probing::{Method, Taxonomy};
use crate::simplex::{ClusterSpace, PreferenceDistribution, Ranking};
use crate::Horizon;

/// Metrics for one (method, horizon, context window) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub method: Method,
    pub horizon: Horizon,
    /// `None` means the whole context pool.
    pub context_window: Option<usize>,
    pub metrics: MetricsReport,
}

/// Metrics restricted to the low-mass clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongTailReport {
    pub head_mass: f64,
    pub head: Vec<String>,
    pub tail: Vec<String>,
    /// Samples whose label puts no mass on the tail.
    pub excluded: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub provider_calls: usize,
    pub prompt_tokens: u64,
    /// Every trace's call count matches the method's cost formula.
    pub budget_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_digest: String,
    pub settings: MetricSettings,
    pub session_rule: String,
    pub n_rows: usize,
    pub n_failed: usize,
    pub n_skipped: usize,
    pub groups: Vec<GroupReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub long_tail: Option<LongTailReport>,
    pub totals: Totals,
    pub failed: Vec<FailureRow>,
    pub skipped: Vec<Skipped>,
}

struct Evaluated<'a> {
    row: &'a ProbeRow,
    metrics: SampleMetrics,
}

fn expected_calls(row: &ProbeRow, k: usize, taxonomy: Option<&Taxonomy>) -> Option<usize> {
    match row.method {
        Method::Likelihood => Some(k),
        Method::Generative | Method::Direct => Some(1),
        Method::Hierarchical => {
            let tax = taxonomy?;
            let selected = row.trace.selected_branches.as_ref()?;
            Some(
                tax.k1()
                    + selected
                        .iter()
                        .map(|&j| tax.children(j).len())
                        .sum::<usize>(),
            )
        }
    }
}

fn context_window(cfg: &ExperimentConfig) -> Option<usize> {
    cfg.split.context_sessions
}

fn metric_columns(k_list: &[usize]) -> Vec<String> {
    let mut cols = Vec::new();
    for name in ["ndcg", "precision", "recall"] {
        for k in k_list {
            cols.push(format!("{name}@{k}"));
        }
    }
    cols
}

fn write_rows_csv(
    path: &Path,
    cfg: &ExperimentConfig,
    evaluated: &[Evaluated<'_>],
    failures: &[FailureRow],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "user_id".to_string(),
        "method".into(),
        "horizon".into(),
        "context_window".into(),
        "calls".into(),
        "prompt_tokens".into(),
        "js_div".into(),
    ];
    header.extend(metric_columns(&cfg.k_list));
    header.push("skipped_reason".into());
    w.write_record(&header)?;
    let window = context_window(cfg).map_or(String::new(), |n| n.to_string());
    for e in evaluated {
        let mut rec = vec![
            e.row.user_id.clone(),
            e.row.method.as_str().to_string(),
            e.row.horizon.as_str().to_string(),
            window.clone(),
            e.row.trace.calls.to_string(),
            e.row.trace.prompt_tokens_total.to_string(),
            e.metrics.js_div.map_or(String::new(), |v| v.to_string()),
        ];
        for m in [&e.metrics.ndcg, &e.metrics.precision, &e.metrics.recall] {
            for k in &cfg.k_list {
                rec.push(m[k].to_string());
            }
        }
        rec.push(String::new());
        w.write_record(&rec)?;
    }
    for f in failures {
        let mut rec = vec![
            f.user_id.clone(),
            cfg.method.as_str().to_string(),
            cfg.horizon.as_str().to_string(),
            window.clone(),
        ];
        rec.resize(header.len() - 1, String::new());
        rec.push(f.error.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Recomputes every aggregate from `rows.csv` and compares with the report.
fn check_rows_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let mut sums: HashMap<String, (f64, usize)> = HashMap::new();
    let skip_c = col("skipped_reason").expect("written above");
    let method_c = col("method").expect("written above");
    let horizon_c = col("horizon").expect("written above");
    for rec in r.records() {
        let rec = rec?;
        if !rec[skip_c].is_empty() {
            continue;
        }
        for (i, name) in header.iter().enumerate() {
            if name.contains('@') || name == "js_div" {
                if rec[i].is_empty() {
                    continue;
                }
                let v: f64 = rec[i].parse().map_err(|_| {
                    Error::SchemaMismatch(format!("rows.csv {name}: {:?}", &rec[i]))
                })?;
                let key = format!("{}/{}/{name}", &rec[method_c], &rec[horizon_c]);
                let e = sums.entry(key).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
    }
    let mut expected: Vec<(String, f64)> = Vec::new();
    for g in &report.groups {
        let prefix = format!("{}/{}", g.method.as_str(), g.horizon.as_str());
        let m = &g.metrics;
        for (name, map) in [
            ("ndcg", &m.ndcg),
            ("precision", &m.precision),
            ("recall", &m.recall),
        ] {
            for (k, v) in map {
                expected.push((format!("{prefix}/{name}@{k}"), *v));
            }
        }
        if let Some(js) = m.js_div {
            expected.push((format!("{prefix}/js_div"), js));
        }
    }
    for (name, want) in expected {
        let (sum, n) = sums.get(&name).copied().unwrap_or((0.0, 0));
        let got = if n == 0 { 0.0 } else { sum / n as f64 };
        if (got - want).abs() > 1e-12 {
            return Err(Error::JoinMismatch(format!(
                "rows.csv {name} mean {got} disagrees with report {want}"
            )));
        }
    }
    Ok(())
}

fn long_tail_report(
    cfg: &ExperimentConfig,
    space: &ClusterSpace,
    samples: &HashMap<&str, &SampleRow>,
    evaluated: &[Evaluated<'_>],
) -> Result<Option<LongTailReport>> {
    let ingested = ingest(cfg.corpus_path()?, cfg.data.format, &cfg.data.schema, space)?;
    let records: Vec<_> = group_by_user(ingested.records)
        .into_iter()
        .flat_map(|(_, r)| r)
        .collect();
    let masses = cluster_masses(&records, space.len(), cfg.data.weighting);
    let seg = long_tail_segment(&masses, cfg.head_mass)?;
    if seg.tail.is_empty() {
        return Ok(None);
    }
    let tail: Vec<usize> = seg.tail.iter().copied().collect();
    let sub = space.subspace(&tail)?;
    let position: HashMap<usize, usize> = tail.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut k_list: Vec<usize> = cfg
        .k_list
        .iter()
        .copied()
        .filter(|&k| k <= tail.len())
        .collect();
    if k_list.is_empty() {
        k_list.push(tail.len());
    }
    let settings = MetricSettings {
        k_list: k_list.clone(),
        ..cfg.metric_settings()
    };
    let restrict = |full: &[f64]| -> Vec<f64> { tail.iter().map(|&c| full[c]).collect() };
    let mut rows = Vec::new();
    let mut excluded = 0usize;
    for e in evaluated {
        let label_mass = restrict(&samples[e.row.user_id.as_str()].label);
        if label_mass.iter().sum::<f64>() <= 0.0 {
            excluded += 1;
            continue;
        }
        let label = PreferenceDistribution::normalized(&sub, label_mass)?;
        let order: Vec<usize> = e
            .row
            .ranking
            .iter()
            .filter_map(|c| position.get(c).copied())
            .collect();
        let ranking = Ranking::generated(order, tail.len())?;
        let predicted = e
            .row
            .theta
            .as_ref()
            .map(|t| restrict(t))
            .filter(|t| t.iter().sum::<f64>() > 0.0)
            .map(|t| PreferenceDistribution::normalized(&sub, t))
            .transpose()?;
        rows.push(evaluate_sample(
            &ranking,
            predicted.as_ref(),
            &label,
            &settings,
        )?);
    }
    Ok(Some(LongTailReport {
        head_mass: cfg.head_mass,
        head: seg
            .head
            .iter()
            .map(|&c| space.labels()[c].clone())
            .collect(),
        tail: tail.iter().map(|&c| space.labels()[c].clone()).collect(),
        excluded,
        metrics: MetricsReport::aggregate(&k_list, &rows),
    }))
}

/// Scores probe rows against their labels. Paths default to the files
/// `cmd_probe` writes into `output_dir`.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    probe_path: Option<&Path>,
    samples_path: Option<&Path>,
) -> Result<(RunReport, Outcome)> {
    let started = Instant::now();
    let space = cfg.space()?;
    cfg.validate_common()?;
    if let Some(&max) = cfg.k_list.last() {
        if max > space.len() {
            return Err(Error::KOutOfRange {
                k: max,
                max: space.len(),
            });
        }
    }
    let dir = &cfg.output_dir;
    let probe_path = probe_path.map_or_else(|| dir.join("probe.jsonl"), Path::to_path_buf);
    let samples_path = samples_path.map_or_else(|| dir.join("samples.jsonl"), Path::to_path_buf);
    let rows: Vec<ProbeRow> = read_jsonl(&probe_path)?;
    let sample_rows: Vec<SampleRow> = read_jsonl(&samples_path)?;
    let sibling = |name: &str| probe_path.with_file_name(name);
    let failures: Vec<FailureRow> = if sibling("probe_failures.jsonl").exists() {
        read_jsonl(&sibling("probe_failures.jsonl"))?
    } else {
        Vec::new()
    };
    let skipped: Vec<Skipped> = if sibling("skipped.jsonl").exists() {
        read_jsonl(&sibling("skipped.jsonl"))?
    } else {
        Vec::new()
    };

    let samples: HashMap<&str, &SampleRow> = sample_rows
        .iter()
        .map(|s| (s.user_id.as_str(), s))
        .collect();
    let probed: HashMap<&str, &ProbeRow> = rows.iter().map(|r| (r.user_id.as_str(), r)).collect();
    let failed: HashMap<&str, &FailureRow> =
        failures.iter().map(|f| (f.user_id.as_str(), f)).collect();
    if let Some(r) = rows
        .iter()
        .find(|r| !samples.contains_key(r.user_id.as_str()))
    {
        return Err(Error::JoinMismatch(format!(
            "user {:?} has probe output but no sample",
            r.user_id
        )));
    }
    if let Some(s) = sample_rows.iter().find(|s| {
        !probed.contains_key(s.user_id.as_str()) && !failed.contains_key(s.user_id.as_str())
    }) {
        return Err(Error::JoinMismatch(format!(
            "user {:?} has a sample but no probe output",
            s.user_id
        )));
    }

    let taxonomy = match cfg.method {
        Method::Hierarchical => cfg.taxonomy(&space)?,
        _ => None,
    };
    let settings = cfg.metric_settings();
    let k = space.len();
    let mut evaluated = Vec::with_capacity(rows.len());
    let mut budget_consistent = true;
    for s in &sample_rows {
        let Some(row) = probed.get(s.user_id.as_str()) else {
            continue;
        };
        let label = PreferenceDistribution::new(&space, s.label.clone())?;
        let predicted = row
            .theta
            .as_ref()
            .map(|t| PreferenceDistribution::new(&space, t.clone()))
            .transpose()?;
        let ranking = Ranking::generated(row.ranking.clone(), k)?;
        let metrics = evaluate_sample(&ranking, predicted.as_ref(), &label, &settings)?;
        if expected_calls(row, k, taxonomy.as_ref()) != Some(row.trace.calls) {
            budget_consistent = false;
        }
        evaluated.push(Evaluated { row, metrics });
    }

    let mut groups: BTreeMap<(&str, &str), (Method, Horizon, Vec<&SampleMetrics>)> =
        BTreeMap::new();
    for e in &evaluated {
        groups
            .entry((e.row.method.as_str(), e.row.horizon.as_str()))
            .or_insert_with(|| (e.row.method, e.row.horizon, Vec::new()))
            .2
            .push(&e.metrics);
    }
    let groups = groups
        .into_values()
        .map(|(method, horizon, m)| GroupReport {
            method,
            horizon,
            context_window: context_window(cfg),
            metrics: MetricsReport::aggregate(&cfg.k_list, m),
        })
        .collect();

    let report = RunReport {
        config_digest: cfg.digest(),
        settings,
        session_rule: cfg.split.session_rule.describe(),
        n_rows: evaluated.len(),
        n_failed: failures.len(),
        n_skipped: skipped.len(),
        groups,
        long_tail: long_tail_report(cfg, &space, &samples, &evaluated)?,
        totals: Totals {
            provider_calls: rows.iter().map(|r| r.trace.calls).sum(),
            prompt_tokens: rows.iter().map(|r| r.trace.prompt_tokens_total).sum(),
            budget_consistent,
        },
        failed: failures.clone(),
        skipped,
    };

    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("rows.csv");
    write_rows_csv(&csv_path, cfg, &evaluated, &failures)?;
    check_rows_csv(&csv_path, &report)?;
    write_json(&dir.join("report.json"), &report)?;
    write_json(
        &dir.join("evaluate.timing.json"),
        &Timing {
            command: "evaluate",
            wall_clock_secs: started.elapsed().as_secs_f64(),
            provider_calls: report.totals.provider_calls,
            prompt_tokens: report.totals.prompt_tokens,
        },
    )?;
    let outcome = if failures.is_empty() {
        Outcome::Success
    } else {
        Outcome::Partial {
            failures: failures.len(),
        }
    };
    Ok((report, outcome))
}
