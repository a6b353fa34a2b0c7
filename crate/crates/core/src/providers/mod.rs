//! "Ask the model, read logits."
//!
//! A [`Provider`] answers two questions about a rendered prompt: what are the
//! next-token logits for a handful of watched tokens, and what text does it
//! generate. Implementations:
//!
//! * [`SyntheticOracle`]: answers from a known latent utility vector,
//!   deterministically per (seed, prompt).
//! * [`HttpProvider`]: completion-style JSON endpoint returning top-N logprobs.
//! * [`RecordingProvider`] / [`ReplayProvider`]: JSONL request cache.
//!
//! Every call carries a [`ProbeIntent`] describing which cluster(s) the prompt
//! is about. Remote providers ignore it; the oracle uses it in place of
//! reading the prompt.

mod cache;
mod http;
mod oracle;
pub mod prompt;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use cache::{CacheRecord, CacheSink, RecordingProvider, ReplayProvider};
pub use http::{parse_completion_logprobs, parse_completion_text, HttpConfig, HttpProvider};
pub use oracle::{OracleConfig, SyntheticOracle};
pub use prompt::{
    render_prompt, ChoiceAlphabet, PromptKind, PromptSet, PromptTarget, PromptTemplate,
};

/// Default logit substituted for watched tokens a provider did not return.
pub const DEFAULT_FLOOR: f64 = -100.0;

/// What a probe prompt is asking about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeTarget {
    /// A cluster of a flat space.
    Cluster(usize),
    /// A level-1 branch of a taxonomy.
    Branch(usize),
    /// A level-2 cluster probed under its parent branch.
    Child { parent: usize, child: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeIntent {
    /// No structured metadata (raw prompt).
    Opaque,
    /// Yes/no question about one target.
    YesNo(ProbeTarget),
    /// Multiple choice; `targets[i]` is the i-th watched letter.
    Choice(Vec<ProbeTarget>),
    /// Free generation of a top-`k` lettered list over `targets`.
    RankList { targets: Vec<ProbeTarget>, k: usize },
}

/// Logits read for the first generated position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitResponse {
    pub logits: BTreeMap<String, f64>,
    pub provider_id: String,
    pub prompt_hash: String,
    /// Prompt length in tokens (provider-reported when available).
    pub token_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    pub provider_id: String,
    pub prompt_hash: String,
    pub token_count: u64,
}

pub trait Provider: Send + Sync {
    fn id(&self) -> &str;

    /// Returns whatever logits the backend exposes for the first generated
    /// position; it may omit some watched tokens.
    fn raw_logits(
        &self,
        prompt: &str,
        watch: &[String],
        intent: &ProbeIntent,
    ) -> Result<LogitResponse>;

    fn generate(&self, prompt: &str, max_tokens: usize, intent: &ProbeIntent)
        -> Result<Generation>;
}

impl<P: Provider + ?Sized> Provider for &P {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn raw_logits(
        &self,
        prompt: &str,
        watch: &[String],
        intent: &ProbeIntent,
    ) -> Result<LogitResponse> {
        (**self).raw_logits(prompt, watch, intent)
    }
    fn generate(
        &self,
        prompt: &str,
        max_tokens: usize,
        intent: &ProbeIntent,
    ) -> Result<Generation> {
        (**self).generate(prompt, max_tokens, intent)
    }
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn raw_logits(
        &self,
        prompt: &str,
        watch: &[String],
        intent: &ProbeIntent,
    ) -> Result<LogitResponse> {
        (**self).raw_logits(prompt, watch, intent)
    }
    fn generate(
        &self,
        prompt: &str,
        max_tokens: usize,
        intent: &ProbeIntent,
    ) -> Result<Generation> {
        (**self).generate(prompt, max_tokens, intent)
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn raw_logits(
        &self,
        prompt: &str,
        watch: &[String],
        intent: &ProbeIntent,
    ) -> Result<LogitResponse> {
        (**self).raw_logits(prompt, watch, intent)
    }
    fn generate(
        &self,
        prompt: &str,
        max_tokens: usize,
        intent: &ProbeIntent,
    ) -> Result<Generation> {
        (**self).generate(prompt, max_tokens, intent)
    }
}

/// SHA-256 of the UTF-8 prompt bytes, lowercase hex.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Whitespace token estimate used when a backend reports no usage.
pub fn approx_token_count(prompt: &str) -> u64 {
    prompt.split_whitespace().count() as u64
}

/// Affirmative and negative verbalizer tokens for yes/no probes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSet {
    affirmative: Vec<String>,
    negative: Vec<String>,
}

impl TokenSet {
    pub fn new<A, N>(affirmative: A, negative: N) -> Result<Self>
    where
        A: IntoIterator,
        A::Item: Into<String>,
        N: IntoIterator,
        N::Item: Into<String>,
    {
        let affirmative: Vec<String> = affirmative.into_iter().map(Into::into).collect();
        let negative: Vec<String> = negative.into_iter().map(Into::into).collect();
        if affirmative.is_empty() || negative.is_empty() {
            return Err(Error::InvalidTokenSet("both sides must be nonempty".into()));
        }
        if affirmative.iter().chain(&negative).any(String::is_empty) {
            return Err(Error::InvalidTokenSet("empty token string".into()));
        }
        if let Some(t) = affirmative.iter().find(|t| negative.contains(t)) {
            return Err(Error::InvalidTokenSet(format!("{t:?} is on both sides")));
        }
        Ok(Self {
            affirmative,
            negative,
        })
    }

    pub fn affirmative(&self) -> &[String] {
        &self.affirmative
    }

    pub fn negative(&self) -> &[String] {
        &self.negative
    }

    /// Affirmative tokens followed by negative tokens.
    pub fn watch_list(&self) -> Vec<String> {
        self.affirmative
            .iter()
            .chain(&self.negative)
            .cloned()
            .collect()
    }
}

impl Default for TokenSet {
    fn default() -> Self {
        Self {
            affirmative: ["Yes", "yes", "Y", "y"].map(String::from).to_vec(),
            negative: ["No", "no", "N", "n"].map(String::from).to_vec(),
        }
    }
}

/// Logits for a watch list with missing tokens floored.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReading {
    pub response: LogitResponse,
    /// Aligned with the watch list.
    pub values: Vec<f64>,
    pub floored: Vec<bool>,
    /// Floor actually substituted: the configured floor, lowered if needed so
    /// it never exceeds a returned logit.
    pub floor: f64,
}

impl ProbeReading {
    pub fn any_floored(&self) -> bool {
        self.floored.iter().any(|&f| f)
    }
}

/// Fetches logits for every watched token, substituting `floor` for tokens
/// the provider did not return.
pub fn next_token_logits(
    provider: &dyn Provider,
    prompt: &str,
    watch: &[String],
    intent: &ProbeIntent,
    floor: f64,
) -> Result<ProbeReading> {
    if watch.is_empty() {
        return Err(Error::InvalidTokenSet("watch list is empty".into()));
    }
    let response = provider.raw_logits(prompt, watch, intent)?;
    if let Some((t, v)) = response.logits.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::MalformedResponse(format!(
            "non-finite logit {v} for {t:?}"
        )));
    }
    let returned_min = response
        .logits
        .values()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let floor = floor.min(returned_min);

    let mut values = Vec::with_capacity(watch.len());
    let mut floored = Vec::with_capacity(watch.len());
    for token in watch {
        match response.logits.get(token) {
            Some(&v) => {
                values.push(v);
                floored.push(false);
            }
            None => {
                values.push(floor);
                floored.push(true);
            }
        }
    }
    if floored.iter().all(|&f| f) {
        return Err(Error::AllFloored);
    }
    Ok(ProbeReading {
        response,
        values,
        floored,
        floor,
    })
}

pub fn generate_text(
    provider: &dyn Provider,
    prompt: &str,
    max_tokens: usize,
    intent: &ProbeIntent,
) -> Result<Generation> {
    if max_tokens == 0 {
        return Err(Error::Config("max_tokens must be >= 1".into()));
    }
    provider.generate(prompt, max_tokens, intent)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(BTreeMap<String, f64>);

    impl Provider for Fixed {
        fn id(&self) -> &str {
            "fixed"
        }
        fn raw_logits(&self, prompt: &str, _: &[String], _: &ProbeIntent) -> Result<LogitResponse> {
            Ok(LogitResponse {
                logits: self.0.clone(),
                provider_id: "fixed".into(),
                prompt_hash: prompt_hash(prompt),
                token_count: approx_token_count(prompt),
            })
        }
        fn generate(&self, _: &str, _: usize, _: &ProbeIntent) -> Result<Generation> {
            Err(Error::Transport("unsupported".into()))
        }
    }

    fn watch(tokens: &[&str]) -> Vec<String> {
        tokens.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn token_set_validation() {
        assert!(TokenSet::new(["Yes"], ["No"]).is_ok());
        assert!(TokenSet::new(Vec::<String>::new(), ["No"]).is_err());
        assert!(TokenSet::new(["Yes", ""], ["No"]).is_err());
        assert!(TokenSet::new(["Yes", "Y"], ["Y"]).is_err());
        let d = TokenSet::default();
        assert_eq!(d.watch_list().len(), 8);
    }

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            prompt_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn floors_missing_tokens() {
        let p = Fixed(BTreeMap::from([
            ("Yes".to_string(), -0.5),
            ("No".to_string(), -2.0),
        ]));
        let r = next_token_logits(
            &p,
            "q",
            &watch(&["Yes", "No", "Y"]),
            &ProbeIntent::Opaque,
            DEFAULT_FLOOR,
        )
        .unwrap();
        assert_eq!(r.values, vec![-0.5, -2.0, -100.0]);
        assert_eq!(r.floored, vec![false, false, true]);
        assert!(r.any_floored());
    }

    #[test]
    fn floor_never_exceeds_returned_minimum() {
        let p = Fixed(BTreeMap::from([("Yes".to_string(), -150.0)]));
        let r = next_token_logits(
            &p,
            "q",
            &watch(&["Yes", "No"]),
            &ProbeIntent::Opaque,
            DEFAULT_FLOOR,
        )
        .unwrap();
        assert!(r.floor <= -150.0);
        assert_eq!(r.values[1], -150.0);
    }

    #[test]
    fn all_missing_is_an_error() {
        let p = Fixed(BTreeMap::from([("Maybe".to_string(), 0.0)]));
        assert!(matches!(
            next_token_logits(
                &p,
                "q",
                &watch(&["Yes", "No"]),
                &ProbeIntent::Opaque,
                DEFAULT_FLOOR
            ),
            Err(Error::AllFloored)
        ));
        assert!(next_token_logits(&p, "q", &[], &ProbeIntent::Opaque, DEFAULT_FLOOR).is_err());
    }

    #[test]
    fn non_finite_logits_are_malformed() {
        let p = Fixed(BTreeMap::from([("Yes".to_string(), f64::NAN)]));
        assert!(matches!(
            next_token_logits(
                &p,
                "q",
                &watch(&["Yes"]),
                &ProbeIntent::Opaque,
                DEFAULT_FLOOR
            ),
            Err(Error::MalformedResponse(_))
        ));
    }
}
