use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("rejection sampler gave up after {attempts} attempts")]
    RejectionBudgetExhausted { attempts: u64 },

    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),

    #[error("inconsistent rotation system: {0}")]
    InconsistentRotation(String),

    #[error("walk from vertex {0} is never killed")]
    NeverKilled(usize),

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("harmonic extension needs a boundary vertex in every component")]
    EmptyBoundary,

    #[error("conjugate gradient did not converge: residual {residual:e} after {iterations} iterations")]
    SolverDidNotConverge { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("circle of radius {r} around ({x}, {y}) leaves the grid")]
    CircleOutsideGrid { x: f64, y: f64, r: f64 },

    #[error("time {0} is beyond the simulated horizon")]
    BeyondHorizon(f64),

    #[error("insufficient horizon: {failed} of {total} paths did not exit")]
    InsufficientHorizon { failed: usize, total: usize },

    #[error("too few survivors: {0}")]
    TooFewSurvivors(usize),

    #[error("retry budget exhausted: {0}")]
    RetryBudgetExhausted(String),

    #[error("empty vertex set: {0}")]
    EmptySet(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
