//! Temporal context/label splits and evaluation samples.

use serde::{Deserialize, Serialize};

use super::{
    proxy_label, sessionize, InteractionRecord, Session, SessionRule, Weighting, SECONDS_PER_DAY,
};
use crate::error::{Error, Result};
use crate::simplex::{ClusterSpace, PreferenceDistribution};
use crate::Horizon;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitMode {
    /// First `ceil(fraction * n)` sessions are context, the rest held out.
    TemporalFraction {
        #[serde(default = "default_fraction")]
        fraction: f64,
    },
    /// `context_days` before the cut are context, `label_days` after are the
    /// label window. The cut defaults to the user's first UTC day plus
    /// `context_days`.
    FixedRange {
        context_days: u32,
        label_days: u32,
        #[serde(default)]
        cut_timestamp: Option<i64>,
    },
}

fn default_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(flatten)]
    pub mode: SplitMode,
    /// Keep only the most recent N context sessions.
    #[serde(default)]
    pub context_sessions: Option<usize>,
    #[serde(default)]
    pub horizon: Horizon,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            mode: SplitMode::TemporalFraction { fraction: 0.8 },
            context_sessions: None,
            horizon: Horizon::LongTerm,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            SplitMode::TemporalFraction { fraction } => {
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(Error::Config(format!("fraction {fraction} outside (0, 1)")));
                }
            }
            SplitMode::FixedRange {
                context_days,
                label_days,
                ..
            } => {
                if context_days == 0 || label_days == 0 {
                    return Err(Error::Config(
                        "context_days and label_days must be >= 1".into(),
                    ));
                }
            }
        }
        if self.context_sessions == Some(0) {
            return Err(Error::Config("context_sessions must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub context: Vec<Session>,
    pub label: Vec<InteractionRecord>,
}

/// Splits one user's sessions into context and label window.
pub fn split(sessions: &[Session], spec: &SplitSpec) -> Result<SplitOutcome> {
    spec.validate()?;
    let (mut context, label_sessions): (Vec<Session>, Vec<Session>) = match spec.mode {
        SplitMode::TemporalFraction { fraction } => {
            let n = sessions.len();
            // guard against 0.8 * 5 = 4.000000000000001
            let cut = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
            if n < 2 || cut == 0 || cut >= n {
                return Err(Error::InsufficientHistory(format!(
                    "{n} session(s) cannot be split at fraction {fraction}"
                )));
            }
            (sessions[..cut].to_vec(), sessions[cut..].to_vec())
        }
        SplitMode::FixedRange {
            context_days,
            label_days,
            cut_timestamp,
        } => {
            let first = sessions
                .first()
                .ok_or_else(|| Error::InsufficientHistory("no sessions".into()))?;
            let cut = cut_timestamp.unwrap_or_else(|| {
                first.start.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY
                    + context_days as i64 * SECONDS_PER_DAY
            });
            let context_from = cut - context_days as i64 * SECONDS_PER_DAY;
            let label_until = cut + label_days as i64 * SECONDS_PER_DAY;
            let context = sessions
                .iter()
                .filter(|s| s.end < cut && s.start >= context_from)
                .cloned()
                .collect();
            let label = sessions
                .iter()
                .filter(|s| s.start >= cut && s.start < label_until)
                .map(|s| {
                    let records: Vec<_> = s
                        .records
                        .iter()
                        .filter(|r| r.timestamp < label_until)
                        .cloned()
                        .collect();
                    Session::from_records(records)
                })
                .collect();
            (context, label)
        }
    };
    if let Some(n) = spec.context_sessions {
        if context.len() > n {
            context.drain(..context.len() - n);
        }
    }
    if context.is_empty() || label_sessions.is_empty() {
        return Err(Error::InsufficientHistory(
            "empty context or label window".into(),
        ));
    }
    let label = match spec.horizon {
        Horizon::LongTerm => label_sessions.into_iter().flat_map(|s| s.records).collect(),
        Horizon::ShortTerm => label_sessions.into_iter().next().unwrap().records,
    };
    Ok(SplitOutcome { context, label })
}

/// A (context, future distribution) pair for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub user_id: String,
    pub context: Vec<Session>,
    pub label: PreferenceDistribution,
    pub horizon: Horizon,
    /// Timestamp of the first record in the label window.
    pub label_start: i64,
    pub label_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub user_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<EvalSample>,
    pub skipped: Vec<Skipped>,
}

/// Sessionizes, splits and labels every user. Users that cannot be split are
/// reported in `skipped`.
pub fn build_eval_samples(
    users: &[(String, Vec<InteractionRecord>)],
    spec: &SplitSpec,
    rule: SessionRule,
    weighting: Weighting,
    space: &ClusterSpace,
) -> Result<SampleSet> {
    spec.validate()?;
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for (user, records) in users {
        let sessions = sessionize(records, rule);
        let outcome = split(&sessions, spec).and_then(|o| {
            let label = proxy_label(&o.label, weighting, space)?;
            Ok((o, label))
        });
        match outcome {
            Ok((o, label)) => samples.push(EvalSample {
                user_id: user.clone(),
                label_start: o.label.first().map_or(0, |r| r.timestamp),
                label_count: o.label.len(),
                context: o.context,
                label,
                horizon: spec.horizon,
            }),
            Err(
                e @ (Error::InsufficientHistory(_) | Error::AllZeroWeights | Error::EmptyWindow),
            ) => skipped.push(Skipped {
                user_id: user.clone(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if samples.is_empty() {
        return Err(Error::InsufficientHistory(format!(
            "no user could be split ({} skipped)",
            skipped.len()
        )));
    }
    Ok(SampleSet { samples, skipped })
}
