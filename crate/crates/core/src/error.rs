use thiserror::Error;

use crate::solvers::RunTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ergodic norm horizon {horizon} needs {needed} iterates, sequence has {available}")]
    InsufficientHistory {
        horizon: usize,
        needed: usize,
        available: usize,
    },

    #[error("matrix is not doubly stochastic (worst row/column sum deviation {deviation:e})")]
    NotDoublyStochastic { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("agent index {index} out of range for {agents} agents")]
    AgentOutOfRange { index: usize, agents: usize },

    #[error("reference solver did not reach tolerance {tol:e} within {iterations} iterations")]
    ReferenceSolverDiverged { tol: f64, iterations: usize },

    #[error("iterates diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        trace: Option<Box<RunTrace>>,
    },

    #[error("step-size heterogeneity too large: kappa_D = {kappa_d} must be below {limit}")]
    HeterogeneityTooLarge { kappa_d: f64, limit: f64 },

    #[error("rate {lambda} is not contractive (must be < 1)")]
    RateNotContractive { lambda: f64 },

    #[error("lambda {lambda} must exceed delta {delta}")]
    LambdaBelowDelta { lambda: f64, delta: f64 },

    #[error("last-arrow conditions violated: {0}")]
    LastArrowCondition(String),

    #[error("gain product {product} is not below 1")]
    GainProductNotContractive { product: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
