//! Inference routes from history text to a preference distribution.
//!
//! | route | provider calls |
//! |-------|----------------|
//! | [`likelihood_probe`] | K |
//! | [`generative_classify`] | 1 |
//! | [`hierarchical_probe`] | K1 + children of the selected branches |
//! | [`direct_generate_ranking`] | 1 (no distribution) |
//!
//! Yes/no probes for distinct clusters are independent and run on up to
//! `concurrency` worker threads. Results are assembled by index, so the
//! output does not depend on scheduling.

mod direct;
mod generative;
mod hierarchical;
mod likelihood;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{
    next_token_logits, ProbeIntent, ProbeTarget, PromptSet, Provider, TokenSet, DEFAULT_FLOOR,
};
use crate::Horizon;

pub use direct::{direct_generate_ranking, parse_letter_ranking};
pub use generative::generative_classify;
pub use hierarchical::{
    hierarchical_probe, select_branches, BranchStrategy, CombineMode, Taxonomy,
};
pub use likelihood::likelihood_probe;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Likelihood,
    Generative,
    Hierarchical,
    Direct,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Likelihood => "likelihood",
            Method::Generative => "generative",
            Method::Hierarchical => "hierarchical",
            Method::Direct => "direct",
        }
    }
}

/// What to do when a single yes/no probe fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorPolicy {
    #[default]
    Abort,
    /// Use a neutral score of 0.5 and flag the cluster.
    Substitute,
}

/// Score used for a failed probe under [`ErrorPolicy::Substitute`].
pub const NEUTRAL_SCORE: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub tau: f64,
    pub tokens: TokenSet,
    pub prompts: PromptSet,
    pub concurrency: usize,
    pub on_error: ErrorPolicy,
    pub floor: f64,
}

impl ProbeConfig {
    pub fn new(horizon: Horizon) -> Self {
        Self {
            tau: 1.0,
            tokens: TokenSet::default(),
            prompts: PromptSet::defaults(horizon),
            concurrency: 1,
            on_error: ErrorPolicy::Abort,
            floor: DEFAULT_FLOOR,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_concurrency(mut self, n: usize) -> Self {
        self.concurrency = n;
        self
    }

    pub fn with_error_policy(mut self, policy: ErrorPolicy) -> Self {
        self.on_error = policy;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::NonPositiveTemperature(self.tau));
        }
        Ok(())
    }
}

/// Per-run accounting of one inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrace {
    pub method: Method,
    /// Provider invocations, including failed ones.
    pub calls: usize,
    pub prompt_tokens_total: u64,
    /// Cluster scores before the final normalization; absent for direct
    /// generation.
    pub raw_scores: Option<Vec<f64>>,
    pub floored_flags: Vec<bool>,
    /// Clusters whose probe failed and were given the neutral score.
    pub failed: Vec<usize>,
    pub l1_scores: Option<Vec<f64>>,
    pub l1_distribution: Option<Vec<f64>>,
    pub selected_branches: Option<Vec<usize>>,
    pub l1_calls: Option<usize>,
    pub l2_calls: Option<usize>,
    pub notes: Vec<String>,
}

impl ProbeTrace {
    fn new(method: Method) -> Self {
        Self {
            method,
            calls: 0,
            prompt_tokens_total: 0,
            raw_scores: None,
            floored_flags: Vec::new(),
            failed: Vec::new(),
            l1_scores: None,
            l1_distribution: None,
            selected_branches: None,
            l1_calls: None,
            l2_calls: None,
            notes: Vec::new(),
        }
    }

    pub fn floored_count(&self) -> usize {
        self.floored_flags.iter().filter(|&&f| f).count()
    }
}

/// Runs `f` over `items` on up to `workers` threads; output order matches
/// input order.
pub(crate) fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot poisoned") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot poisoned").expect("slot filled"))
        .collect()
}

/// One yes/no question.
pub(crate) struct YesNoProbe {
    pub label: String,
    pub prompt: String,
    pub target: ProbeTarget,
}

#[derive(Debug, Clone)]
pub(crate) struct YesNoScore {
    pub score: f64,
    pub floored: bool,
    pub tokens: u64,
    pub failed: bool,
}

/// `exp(pos) / (exp(pos) + exp(neg))`, shifted by the max.
pub(crate) fn two_way_softmax(pos: f64, neg: f64) -> f64 {
    let m = pos.max(neg);
    let ep = (pos - m).exp();
    let en = (neg - m).exp();
    ep / (ep + en)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ask_yes_no(
    provider: &dyn Provider,
    probe: &YesNoProbe,
    cfg: &ProbeConfig,
) -> Result<YesNoScore> {
    let watch = cfg.tokens.watch_list();
    let reading = next_token_logits(
        provider,
        &probe.prompt,
        &watch,
        &ProbeIntent::YesNo(probe.target),
        cfg.floor,
    )?;
    let n_pos = cfg.tokens.affirmative().len();
    let (pos, neg) = reading.values.split_at(n_pos);
    Ok(YesNoScore {
        score: two_way_softmax(mean(pos), mean(neg)),
        floored: reading.any_floored(),
        tokens: reading.response.token_count,
        failed: false,
    })
}

/// Asks every probe and applies the error policy in index order.
pub(crate) fn score_yes_no(
    provider: &dyn Provider,
    probes: &[YesNoProbe],
    cfg: &ProbeConfig,
    index_of: impl Fn(usize) -> usize,
) -> Result<Vec<YesNoScore>> {
    let results = par_map(probes, cfg.concurrency, |p| ask_yes_no(provider, p, cfg));
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| match (r, cfg.on_error) {
            (Ok(s), _) => Ok(s),
            (Err(e), ErrorPolicy::Abort) => Err(Error::ProbeFailed {
                index: index_of(i),
                label: probes[i].label.clone(),
                source: Box::new(e),
            }),
            (Err(_), ErrorPolicy::Substitute) => Ok(YesNoScore {
                score: NEUTRAL_SCORE,
                floored: false,
                tokens: 0,
                failed: true,
            }),
        })
        .collect()
}
