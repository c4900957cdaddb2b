use thiserror::Error;

/// Errors raised across measure construction, linear solves, estimation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible spike layout: {r} spikes with circular gap {min_gap} need r * gap < 2*pi")]
    Infeasible { r: usize, min_gap: f64 },

    #[error("rejection sampling gave up after {attempts} attempts (r = {r}, gap = {min_gap})")]
    SamplingExhausted {
        r: usize,
        min_gap: f64,
        attempts: usize,
    },

    #[error("ill-conditioned {what}: condition estimate {condition:e} exceeds {threshold:e}")]
    IllConditioned {
        what: &'static str,
        condition: f64,
        threshold: f64,
    },

    #[error("rank deficient data matrix: {0}")]
    RankDeficient(String),

    #[error("spike collision: locations {first} and {second} closer than {tolerance:e}")]
    SpikeCollision {
        first: f64,
        second: f64,
        tolerance: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("every trial failed at n = {n}")]
    LevelFailed { n: usize },

    #[error("malformed document: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
