use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported tensor arity {0}: only one or two copies are modelled")]
    UnsupportedArity(usize),

    #[error("dimension mismatch: operator is {operator}x{operator}, state is {state}x{state}")]
    DimensionMismatch { operator: usize, state: usize },

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("support search did not terminate after {iterations} tilts (a = {tilt_a}, b = {tilt_b})")]
    SearchFailure { iterations: usize, tilt_a: f64, tilt_b: f64 },

    #[error("support search failed at q = {q}: {source}")]
    SearchFailureAt {
        q: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("value iteration made no progress: {0}")]
    NonProgress(String),

    #[error("trial exceeded the copy cap of {cap} copies")]
    RunawayTrial { cap: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
