//! Preference-distribution inference by logit probing.
//!
//! Given a user's interaction history and a fixed set of preference clusters,
//! this crate asks a language model (or a synthetic oracle standing in for
//! one) about each cluster and turns the next-token logits into a
//! probability distribution over clusters. Three inference routes are
//! provided in [`probing`]: per-cluster yes/no likelihood probing, one-shot
//! generative classification over lettered choices, and two-level
//! hierarchical probing for large cluster sets. A direct-generation baseline
//! is included for comparison.
//!
//! Supporting modules:
//!
//! * [`simplex`]: distributions, softmax, empirical proxy labels, ranking.
//! * [`providers`]: prompt templates, oracle, HTTP client, record/replay.
//! * [`metrics`]: NDCG/Precision/Recall@k, JS divergence, permutation
//!   brute force.
//! * [`dataset`]: ingestion, sessions, temporal splits, SFT export.
//! * [`harness`]: experiment config and the end-to-end commands behind the
//!   `prefprobe` binary.
//!
//! The runnable programs under `examples/` walk through each capability.

pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod probing;
pub mod providers;
pub mod simplex;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use simplex::{
    empirical_proxy, rank_descending, softmax, ClusterSpace, LatentUtility, PreferenceDistribution,
    Ranking, TieRule,
};

/// Preference horizon a prompt or label refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    #[default]
    LongTerm,
    ShortTerm,
}

impl Horizon {
    pub fn as_phrase(self) -> &'static str {
        match self {
            Horizon::LongTerm => "long-term",
            Horizon::ShortTerm => "short-term",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Horizon::LongTerm => "long_term",
            Horizon::ShortTerm => "short_term",
        }
    }
}
