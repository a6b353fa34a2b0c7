use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the probing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    // simplex math
    #[error("non-finite score at index {index}: {value}")]
    NonFiniteScore { index: usize, value: f64 },
    #[error("temperature must be > 0, got {0}")]
    NonPositiveTemperature(f64),
    #[error("empty score vector")]
    EmptyScores,
    #[error("interaction window is empty")]
    EmptyWindow,
    #[error("all interaction weights in the window are zero")]
    AllZeroWeights,
    #[error("invalid weight {0} (must be finite and >= 0)")]
    InvalidWeight(f64),
    #[error("cluster index {index} out of range for K = {k}")]
    ClusterIndexOutOfRange { index: usize, k: usize },
    #[error("invalid cluster space: {0}")]
    InvalidSpace(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("vectors belong to different cluster spaces ({left} vs {right} clusters)")]
    SpaceMismatch { left: usize, right: usize },

    // providers
    #[error("unresolved placeholder {{{0}}} in prompt template")]
    UnresolvedPlaceholder(String),
    #[error("{k} choices exceed the {limit}-letter alphabet; use hierarchical probing")]
    TooManyChoices { k: usize, limit: usize },
    #[error("invalid token set: {0}")]
    InvalidTokenSet(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("every watched token was missing from the response")]
    AllFloored,
    #[error("replay cache has no entry for prompt hash {0}")]
    CacheMiss(String),
    #[error("corrupt cache line {line}: {reason}")]
    CacheCorrupt { line: usize, reason: String },

    // probing
    #[error("probe for cluster {index} ({label}) failed: {source}")]
    ProbeFailed {
        index: usize,
        label: String,
        #[source]
        source: Box<Error>,
    },
    #[error("branch selection is empty")]
    EmptySelection,
    #[error("invalid branch strategy: {0}")]
    InvalidStrategy(String),
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
    #[error("no valid choice letters in generated text {0:?}")]
    UnparseableGeneration(String),

    // metrics
    #[error("cutoff k = {k} outside 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("no relevant items; standard recall is undefined")]
    NoRelevantItems,
    #[error("K = {0} is too large for permutation brute force (max {1})")]
    KTooLargeForBruteForce(usize, usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    // dataset
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("no valid records after filtering")]
    EmptyAfterFiltering,
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("empty corpus")]
    EmptyCorpus,

    // harness
    #[error("configuration error: {0}")]
    Config(String),
    #[error("join mismatch: user {0} present in only one input")]
    JoinMismatch(String),
    #[error("run interrupted after {0} completed units")]
    Interrupted(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
