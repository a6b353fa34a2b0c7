//! End-to-end commands behind the `prefprobe` binary.
//!
//! Every command takes an [`ExperimentConfig`] and writes plain files into
//! `output_dir`:
//!
//! | command | outputs |
//! |---------|---------|
//! | [`cmd_simulate`] | `corpus.jsonl`, `clusters.txt`, `truth.jsonl` |
//! | [`cmd_probe`] | `samples.jsonl`, `skipped.jsonl`, `probe.jsonl`, `probe_failures.jsonl`, `probe.checkpoint.jsonl` |
//! | [`cmd_evaluate`] | `report.json`, `rows.csv` |
//! | [`cmd_certify_lemma`] | `certification.json` |
//! | [`cmd_report_evolution`] | `evolution.csv`, `evolution.dat` |
//! | [`cmd_export_sft`] | `sft.jsonl` |
//!
//! With the oracle or replay provider and a fixed seed, all of these are
//! byte-identical across runs and concurrency settings. Wall-clock time goes
//! to a separate `timing.json`.

mod certify;
mod config;
mod evaluate;
mod evolution;
mod probe;
mod simulate;

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub use certify::{cmd_certify_lemma, CertifyFailure, CertifyReport};
pub use config::{
    apply_override, CertifyConfig, DataConfig, Drift, EvolutionConfig, ExperimentConfig,
    LabelSource, ProviderConfig, ProviderKind, RunPolicy, SimulateConfig, SpaceConfig, SplitConfig,
    TokenConfig,
};
pub use evaluate::{cmd_evaluate, GroupReport, LongTailReport, RunReport, Totals};
pub use evolution::cmd_report_evolution;
pub use probe::{
    cmd_export_sft, cmd_probe, load_samples, FailureRow, ProbeRow, ProbeSummary, SampleRow,
};
pub use simulate::{cmd_simulate, SimulateSummary, TruthRow, TruthTable};

/// How a command ended when it did not return an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some users failed under the `continue` policy.
    Partial {
        failures: usize,
    },
    CertificationFailed {
        failures: usize,
    },
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial { .. } => 3,
            Outcome::CertificationFailed { .. } => 4,
        }
    }
}

/// 2 for configuration and input validation errors, 1 for runtime failures.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Transport(_)
        | Error::MalformedResponse(_)
        | Error::AllFloored
        | Error::CacheMiss(_)
        | Error::ProbeFailed { .. }
        | Error::UnparseableGeneration(_)
        | Error::Interrupted(_)
        | Error::Io(_) => 1,
        _ => 2,
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|source| Error::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            Error::SchemaMismatch(format!("{} line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub(crate) struct Timing<'a> {
    pub command: &'a str,
    pub wall_clock_secs: f64,
    pub provider_calls: usize,
    pub prompt_tokens: u64,
}
