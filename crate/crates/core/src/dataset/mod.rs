//! Interaction data: ingestion, sessions, temporal splits, evaluation
//! samples, SFT export, long-tail segmentation and group-level drift.

mod evolution;
mod history;
mod ingest;
mod segment;
mod session;
mod sft;
mod split;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{empirical_proxy, ClusterSpace, PreferenceDistribution};

pub use evolution::{group_evolution, EvolutionMatrix};
pub use history::{render_history, HistoryStyle};
pub use ingest::{ingest, write_corpus_jsonl, Ingested, InputFormat, Reject, SchemaConfig};
pub use segment::{cluster_masses, long_tail_segment, Segments};
pub use session::{sessionize, SessionRule};
pub use sft::{export_sft_pairs, read_sft_pairs, SftPair};
pub use split::{
    build_eval_samples, split, EvalSample, SampleSet, Skipped, SplitMode, SplitOutcome, SplitSpec,
};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One user-item interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub item_id: String,
    /// Epoch seconds.
    pub timestamp: i64,
    pub clusters: Vec<usize>,
    /// Rating, play duration, or 1.0.
    pub weight: f64,
    pub title: Option<String>,
}

impl InteractionRecord {
    pub fn validate(&self, space: &ClusterSpace) -> Result<()> {
        if self.timestamp < 0 {
            return Err(Error::SchemaMismatch(format!(
                "negative timestamp {}",
                self.timestamp
            )));
        }
        if self.clusters.is_empty() {
            return Err(Error::SchemaMismatch("record has no clusters".into()));
        }
        for &c in &self.clusters {
            space.check_index(c)?;
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::InvalidWeight(self.weight));
        }
        Ok(())
    }
}

/// Time-ordered interactions of one user within one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub records: Vec<InteractionRecord>,
    pub start: i64,
    pub end: i64,
}

impl Session {
    pub(crate) fn from_records(records: Vec<InteractionRecord>) -> Self {
        debug_assert!(!records.is_empty());
        let start = records.first().map_or(0, |r| r.timestamp);
        let end = records.last().map_or(0, |r| r.timestamp);
        Self {
            records,
            start,
            end,
        }
    }
}

/// How interaction weights enter the proxy label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every interaction counts 1.
    #[default]
    Unit,
    /// Use the recorded weight (rating or duration).
    Recorded,
}

/// Empirical proxy over a set of records.
pub fn proxy_label<'a, I>(
    records: I,
    weighting: Weighting,
    space: &ClusterSpace,
) -> Result<PreferenceDistribution>
where
    I: IntoIterator<Item = &'a InteractionRecord>,
{
    empirical_proxy(
        records.into_iter().map(|r| {
            let w = match weighting {
                Weighting::Unit => 1.0,
                Weighting::Recorded => r.weight,
            };
            (r.clusters.as_slice(), w)
        }),
        space,
    )
}

/// Groups records by user (sorted by user id), each sorted by timestamp.
pub fn group_by_user(records: Vec<InteractionRecord>) -> Vec<(String, Vec<InteractionRecord>)> {
    let mut users: BTreeMap<String, Vec<InteractionRecord>> = BTreeMap::new();
    for r in records {
        users.entry(r.user_id.clone()).or_default().push(r);
    }
    users
        .into_iter()
        .map(|(u, mut rs)| {
            rs.sort_by_key(|r| r.timestamp);
            (u, rs)
        })
        .collect()
}

pub(crate) fn create_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub(crate) fn write_lines<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = create_writer(path)?;
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
