use thiserror::Error;

/// Errors produced across the search engine.
#[derive(Debug, Error)]
pub enum NasError {
    #[error("empty feasible set: {0}")]
    EmptyFeasibleSet(String),

    #[error("d_model {d_model} is not divisible by n_head {n_head}")]
    Divisibility { d_model: u64, n_head: u64 },

    #[error("malformed architecture config: {0}")]
    InvalidConfig(String),

    #[error("malformed adaptive-embedding cutoffs: {0}")]
    Cutoff(String),

    #[error("plugin failure: {0}")]
    PluginFailure(String),

    #[error("measurement failure: {0}")]
    MeasurementFailure(String),

    #[error("no tabular entry for config key {0}")]
    MissingEntry(String),

    #[error("frontier is empty")]
    EmptyFrontier,

    #[error("reference point is not dominated by every frontier point: {0}")]
    BadReference(String),

    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("id sets differ: {0}")]
    IdMismatch(String),

    #[error("bin {0} is empty")]
    EmptyBin(usize),

    #[error("search space exhausted at iteration {0}")]
    ExhaustedSpace(usize),

    #[error("invalid settings: {0}")]
    InvalidSettings(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, NasError>;
