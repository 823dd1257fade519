use thiserror::Error;

/// Errors surfaced by graph construction, problem setup, parsing, and the
/// experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Requested edge density cannot yield a connected simple graph.
    #[error("infeasible density {requested}: must be within [{minimum}, 1]")]
    InfeasibleDensity { requested: f64, minimum: f64 },

    #[error("graph is not connected")]
    DisconnectedGraph,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),

    /// Centralized oracle failed to reach its tolerance.
    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("config error: {0}")]
    Config(String),

    /// A cached cross-node quantity went stale inside an iteration engine.
    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
