//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{
    HistoryStyle, InputFormat, SchemaConfig, SessionRule, SplitMode, SplitSpec, Weighting,
};
use crate::error::{Error, Result};
use crate::metrics::{GainMode, MetricSettings, RecallDenominator, BRUTE_FORCE_MAX_K};
use crate::probing::{BranchStrategy, CombineMode, ErrorPolicy, Method, ProbeConfig, Taxonomy};
use crate::providers::{HttpConfig, PromptSet, TokenSet, DEFAULT_FLOOR};
use crate::simplex::ClusterSpace;
use crate::Horizon;

/// Keys left out of the config digest: they change how a run executes, not
/// what it computes.
const DIGEST_EXCLUDED: &[&[&str]] = &[
    &["max_concurrency"],
    &["output_dir"],
    &["interrupt_after"],
    &["provider", "kind"],
    &["provider", "cache"],
];

/// What to do when a whole user fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunPolicy {
    #[default]
    Abort,
    /// Record the failure and move on to the next user.
    Continue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// Cluster vocabulary, one name per line.
    pub clusters: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenConfig {
    pub affirmative: Vec<String>,
    pub negative: Vec<String>,
}

impl Default for TokenConfig {
    fn default() -> Self {
        let d = TokenSet::default();
        Self {
            affirmative: d.affirmative().to_vec(),
            negative: d.negative().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    #[serde(flatten)]
    pub mode: SplitMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_sessions: Option<usize>,
    #[serde(default)]
    pub session_rule: SessionRule,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            mode: SplitMode::TemporalFraction { fraction: 0.8 },
            context_sessions: None,
            session_rule: SessionRule::default(),
        }
    }
}

/// Where evaluation labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Empirical proxy over the held-out window.
    #[default]
    Proxy,
    /// `softmax(q)` from the truth file on the first label day. Only
    /// available for simulated corpora.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub corpus: Option<PathBuf>,
    pub format: InputFormat,
    pub weighting: Weighting,
    /// Latent utility trajectory written by `simulate`; required by the
    /// oracle provider.
    pub truth: Option<PathBuf>,
    pub label: LabelSource,
    pub history_style: HistoryStyle,
    pub schema: SchemaConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            format: InputFormat::Jsonl,
            weighting: Weighting::Unit,
            truth: None,
            label: LabelSource::Proxy,
            history_style: HistoryStyle::Rating,
            schema: SchemaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Oracle,
    Http,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub noise_sigma: f64,
    pub negative_baseline: f64,
    pub p_swap: f64,
    pub floor: f64,
    /// Give a failed yes/no probe the neutral score instead of failing the
    /// user.
    pub substitute_failed_probes: bool,
    /// JSONL cache read by `replay` and written by `record`.
    pub cache: Option<PathBuf>,
    pub http: HttpConfig,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Oracle,
            noise_sigma: 0.0,
            negative_baseline: 0.0,
            p_swap: 0.0,
            floor: DEFAULT_FLOOR,
            substitute_failed_probes: false,
            cache: None,
            http: HttpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    #[default]
    Static,
    /// Straight line from a start to an end utility over the simulated days.
    LinearInterpolate,
    RandomWalk {
        step_sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub users: usize,
    pub days: usize,
    pub interactions_per_day: usize,
    pub drift: Drift,
    /// Standard deviation of the initial latent utilities.
    pub utility_scale: f64,
    /// Epoch seconds of the first simulated day.
    pub start: i64,
    /// Number of clusters to generate when the vocabulary file is absent.
    pub k: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            users: 100,
            days: 10,
            interactions_per_day: 5,
            drift: Drift::Static,
            utility_scale: 1.0,
            start: 1_699_920_000,
            k: 19,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub k: usize,
    pub trials: usize,
    /// Negate the utilities inside the oracle. Used as a negative control.
    pub anti_isotonic: bool,
    pub utility_scale: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            k: 5,
            trials: 1000,
            anti_isotonic: false,
            utility_scale: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub periods: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self { periods: 4 }
    }
}

fn default_method() -> Method {
    Method::Likelihood
}

fn default_tau() -> f64 {
    1.0
}

fn default_k_list() -> Vec<usize> {
    vec![1, 5, 10, 20]
}

fn default_concurrency() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_head_mass() -> f64 {
    0.8
}

fn default_branch() -> BranchStrategy {
    BranchStrategy::All
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<usize>,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub combine: CombineMode,
    #[serde(default)]
    pub recall_variant: RecallDenominator,
    #[serde(default)]
    pub gain_mode: GainMode,
    #[serde(default)]
    pub relevance_threshold: f64,
    #[serde(default)]
    pub on_error: RunPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_samples: Option<usize>,
    #[serde(default = "default_head_mass")]
    pub head_mass: f64,
    /// Stop after this many users complete. Used to test resumption.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interrupt_after: Option<usize>,
    #[serde(default)]
    pub space: SpaceConfig,
    #[serde(default = "default_branch")]
    pub branch: BranchStrategy,
    #[serde(default)]
    pub tokens: TokenConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub evolution: EvolutionConfig,
}

impl ExperimentConfig {
    /// Minimal config over the given vocabulary file.
    pub fn new(clusters: impl Into<PathBuf>) -> Self {
        let mut table = toml::Table::new();
        let mut space = toml::Table::new();
        space.insert(
            "clusters".into(),
            toml::Value::String(clusters.into().to_string_lossy().into_owned()),
        );
        table.insert("space".into(), toml::Value::Table(space));
        Self::from_table(table).expect("minimal config is valid")
    }

    /// Parses TOML text and applies `key.path=value` overrides. Relative
    /// paths are resolved against `base`.
    pub fn from_toml(text: &str, overrides: &[String], base: Option<&Path>) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg = Self::from_table(table)?;
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::UnreadableFile {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, overrides, path.parent())
    }

    fn from_table(mut table: toml::Table) -> Result<Self> {
        if let Some(split) = table.get_mut("split").and_then(toml::Value::as_table_mut) {
            split
                .entry("mode")
                .or_insert_with(|| toml::Value::String("temporal_fraction".into()));
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.space.clusters);
        fix(&mut self.output_dir);
        for p in [
            self.space.taxonomy.as_mut(),
            self.data.corpus.as_mut(),
            self.data.truth.as_mut(),
            self.provider.cache.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// SHA-256 of the canonical JSON form, without execution-only keys.
    pub fn digest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        for path in DIGEST_EXCLUDED {
            let (last, parents) = path.split_last().expect("nonempty path");
            let mut cur = &mut v;
            for p in parents {
                cur = &mut cur[*p];
            }
            if let Some(obj) = cur.as_object_mut() {
                obj.shift_remove(*last);
            }
        }
        // paths are stamped by file name only so a moved experiment keeps
        // its digest
        strip_dirs(&mut v);
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    pub fn space(&self) -> Result<ClusterSpace> {
        ClusterSpace::from_vocabulary_file(&self.space.clusters)
    }

    pub fn taxonomy(&self, l2: &ClusterSpace) -> Result<Option<Taxonomy>> {
        self.space
            .taxonomy
            .as_ref()
            .map(|p| Taxonomy::from_json_file(p, l2))
            .transpose()
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            mode: self.split.mode,
            context_sessions: self.split.context_sessions,
            horizon: self.horizon,
        }
    }

    pub fn metric_settings(&self) -> MetricSettings {
        MetricSettings {
            k_list: self.k_list.clone(),
            recall: self.recall_variant,
            gains: self.gain_mode,
            relevance_threshold: self.relevance_threshold,
        }
    }

    pub fn probe_config(&self) -> Result<ProbeConfig> {
        let mut cfg = ProbeConfig::new(self.horizon).with_tau(self.tau);
        cfg.tokens = TokenSet::new(
            self.tokens.affirmative.clone(),
            self.tokens.negative.clone(),
        )?;
        cfg.prompts = PromptSet::defaults(self.horizon);
        cfg.floor = self.provider.floor;
        if self.provider.substitute_failed_probes {
            cfg.on_error = ErrorPolicy::Substitute;
        }
        Ok(cfg)
    }

    pub fn corpus_path(&self) -> Result<&Path> {
        self.data
            .corpus
            .as_deref()
            .ok_or_else(|| Error::Config("data.corpus is required".into()))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("seed is required for oracle and simulation runs".into()))
    }

    /// Checks shared by every command.
    pub fn validate_common(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::NonPositiveTemperature(self.tau));
        }
        if self.max_concurrency == 0 {
            return Err(Error::Config("max_concurrency must be >= 1".into()));
        }
        if self.k_list.is_empty() || self.k_list[0] == 0 {
            return Err(Error::Config("k_list must be nonempty with k >= 1".into()));
        }
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("k_list must be strictly ascending".into()));
        }
        if !(self.head_mass > 0.0 && self.head_mass < 1.0) {
            return Err(Error::Config(format!(
                "head_mass {} outside (0, 1)",
                self.head_mass
            )));
        }
        if !(0.0..=1.0).contains(&self.relevance_threshold) {
            return Err(Error::Config("relevance_threshold outside [0, 1]".into()));
        }
        self.split_spec().validate()?;
        if self.data.label == LabelSource::Truth && self.data.truth.is_none() {
            return Err(Error::Config(
                "data.label = \"truth\" needs data.truth".into(),
            ));
        }
        TokenSet::new(
            self.tokens.affirmative.clone(),
            self.tokens.negative.clone(),
        )?;
        Ok(())
    }

    /// Validation before probing or evaluating: files exist, k fits K, the
    /// method has what it needs.
    pub fn validate_run(&self, space: &ClusterSpace) -> Result<()> {
        self.validate_common()?;
        let k = space.len();
        if let Some(&max) = self.k_list.last() {
            if max > k {
                return Err(Error::KOutOfRange { k: max, max: k });
            }
        }
        let corpus = self.corpus_path()?;
        if !corpus.exists() {
            return Err(Error::Config(format!(
                "corpus {} does not exist",
                corpus.display()
            )));
        }
        match self.method {
            Method::Hierarchical => {
                let tax = self.taxonomy(space)?.ok_or_else(|| {
                    Error::Config("hierarchical method needs space.taxonomy".into())
                })?;
                self.branch.validate(tax.k1())?;
            }
            Method::Generative | Method::Direct => {
                let limit = PromptSet::defaults(self.horizon).alphabet.limit();
                if k > limit {
                    return Err(Error::TooManyChoices { k, limit });
                }
            }
            Method::Likelihood => {}
        }
        match self.provider.kind {
            ProviderKind::Oracle => {
                self.require_seed()?;
                let truth = self
                    .data
                    .truth
                    .as_ref()
                    .ok_or_else(|| Error::Config("oracle provider needs data.truth".into()))?;
                if !truth.exists() {
                    return Err(Error::Config(format!(
                        "truth {} does not exist",
                        truth.display()
                    )));
                }
                if !(self.provider.noise_sigma >= 0.0 && self.provider.noise_sigma.is_finite()) {
                    return Err(Error::Config("noise_sigma must be finite and >= 0".into()));
                }
                if !(0.0..=1.0).contains(&self.provider.p_swap) {
                    return Err(Error::Config("p_swap outside [0, 1]".into()));
                }
            }
            ProviderKind::Http => {
                if self.provider.http.url.is_empty() {
                    return Err(Error::Config("provider.http.url is required".into()));
                }
            }
            ProviderKind::Replay => {
                let cache =
                    self.provider.cache.as_ref().ok_or_else(|| {
                        Error::Config("replay provider needs provider.cache".into())
                    })?;
                if !cache.exists() {
                    return Err(Error::Config(format!(
                        "cache {} does not exist",
                        cache.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn validate_certify(&self) -> Result<()> {
        self.validate_common()?;
        self.require_seed()?;
        let k = self.certify.k;
        if k > 6 {
            return Err(Error::KTooLargeForBruteForce(k, 6.min(BRUTE_FORCE_MAX_K)));
        }
        if k < 2 {
            return Err(Error::Config("certify.k must be >= 2".into()));
        }
        if self.certify.trials == 0 {
            return Err(Error::Config("certify.trials must be >= 1".into()));
        }
        Ok(())
    }
}

fn strip_dirs(v: &mut serde_json::Value) {
    let Some(obj) = v.as_object_mut() else { return };
    for (key, val) in obj.iter_mut() {
        match val {
            serde_json::Value::String(s)
                if matches!(key.as_str(), "clusters" | "taxonomy" | "corpus" | "truth") =>
            {
                if let Some(name) = Path::new(s.as_str()).file_name() {
                    *s = name.to_string_lossy().into_owned();
                }
            }
            serde_json::Value::Object(_) => strip_dirs(val),
            _ => {}
        }
    }
}

/// Applies one `a.b.c=value` override. The value is read as a TOML literal
/// and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("nonempty");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {p:?} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3
method = "hierarchical"
k_list = [1, 3]
max_concurrency = 4

[space]
clusters = "clusters.txt"

[branch]
kind = "top_b"
b = 2

[split]
mode = "temporal_fraction"
fraction = 0.8
context_sessions = 5
session_rule = { kind = "gap", minutes = 30 }

[provider]
kind = "oracle"
noise_sigma = 0.25
"#;

    #[test]
    fn parses_and_overrides() {
        let cfg = ExperimentConfig::from_toml(
            BASE,
            &[
                "provider.noise_sigma=0.5".into(),
                "method=likelihood".into(),
            ],
            None,
        )
        .unwrap();
        assert_eq!(cfg.method, Method::Likelihood);
        assert_eq!(cfg.provider.noise_sigma, 0.5);
        assert_eq!(cfg.branch, BranchStrategy::TopB { b: 2 });
        assert_eq!(cfg.split.session_rule, SessionRule::Gap { minutes: 30 });
        assert_eq!(cfg.split.context_sessions, Some(5));
    }

    #[test]
    fn split_section_without_mode_uses_default_fraction() {
        let cfg =
            ExperimentConfig::from_toml("", &["split.context_sessions=8".into()], None).unwrap();
        assert_eq!(
            cfg.split.mode,
            SplitMode::TemporalFraction { fraction: 0.8 }
        );
        assert_eq!(cfg.split.context_sessions, Some(8));
    }

    #[test]
    fn digest_ignores_execution_keys() {
        let a = ExperimentConfig::from_toml(BASE, &[], None).unwrap();
        let b = ExperimentConfig::from_toml(
            BASE,
            &[
                "max_concurrency=16".into(),
                "output_dir=elsewhere".into(),
                "provider.kind=replay".into(),
                "provider.cache=c.jsonl".into(),
                "interrupt_after=3".into(),
            ],
            None,
        )
        .unwrap();
        let c = ExperimentConfig::from_toml(BASE, &["tau=0.5".into()], None).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_k_list() {
        assert!(ExperimentConfig::from_toml(BASE, &["bogus=1".into()], None).is_err());
        let cfg = ExperimentConfig::from_toml(BASE, &["k_list=[5, 1]".into()], None).unwrap();
        assert!(matches!(cfg.validate_common(), Err(Error::Config(_))));
    }

    #[test]
    fn k_above_space_is_rejected() {
        let cfg = ExperimentConfig::from_toml(BASE, &["k_list=[1, 30]".into()], None).unwrap();
        let space = ClusterSpace::new(["a", "b", "c"]).unwrap();
        assert!(matches!(
            cfg.validate_run(&space),
            Err(Error::KOutOfRange { k: 30, max: 3 })
        ));
    }

    #[test]
    fn certify_limits() {
        let cfg = ExperimentConfig::from_toml(BASE, &["certify.k=7".into()], None).unwrap();
        assert!(matches!(
            cfg.validate_certify(),
            Err(Error::KTooLargeForBruteForce(7, 6))
        ));
    }

    #[test]
    fn override_string_fallback() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "data.corpus=some/path.jsonl").unwrap();
        assert_eq!(t["data"]["corpus"].as_str(), Some("some/path.jsonl"));
        assert!(apply_override(&mut t, "novalue").is_err());
    }
}
