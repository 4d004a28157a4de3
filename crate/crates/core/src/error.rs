use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("catalog must contain at least one video")]
    EmptyCatalog,
    #[error("day {0} outside the simulated horizon 1..={1}")]
    DayOutOfRange(u32, u32),
    #[error("requested {requested} candidates from a pool of {available}")]
    PoolExhausted { requested: usize, available: usize },
    #[error("k-means needs at least {k} distinct rows, found {distinct}")]
    TooFewDistinctRows { k: usize, distinct: usize },
    #[error("ambiguous cluster mapping: {0}")]
    AmbiguousMapping(String),
    #[error("emotion class `{class}` has {rows} training rows, need at least {min}")]
    SparseClass {
        class: String,
        rows: usize,
        min: usize,
    },
    #[error("collinear columns in regression: {0}")]
    SingularRegression(String),
    #[error("unknown causal target `{0}`")]
    UnknownTarget(String),
    #[error("no valid consecutive-day pairs in the causal dataset")]
    NoCausalPairs,
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("no candidates to rank")]
    EmptyCandidates,
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("stage `{stage}` requires artifacts from `{missing}`; run `emorec {missing}` first")]
    MissingArtifact { stage: String, missing: String },
    #[error("malformed artifact {path}: {detail}")]
    MalformedArtifact { path: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
