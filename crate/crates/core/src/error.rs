use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("index {index} out of range for {len} arms")]
    Index { index: usize, len: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size limit exceeded: {what} is {got}, limit {limit}")]
    SizeLimit {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("invalid clique cover: {0}")]
    InvalidCover(#[from] CoverViolation),

    #[error("infeasible truncated simplex: gamma {gamma} exceeds 1/N = {bound}")]
    Infeasible { gamma: f64, bound: f64 },

    #[error("solver did not converge after {iterations} iterations (kkt residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("feedback inconsistent with graph: {0}")]
    Feedback(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid environment specification: {0}")]
    Spec(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing monitor data: {0}")]
    MissingMonitorData(String),

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("inconsistent horizons: {0}")]
    InconsistentHorizons(String),

    #[error("run aborted at round {round}: {source}")]
    RunAborted {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// First violation found when checking a clique cover against a graph.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverViolation {
    #[error("arms {0} and {1} share a clique but are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("arm {0} is not covered")]
    Uncovered(usize),
    #[error("arm {0} appears in more than one clique")]
    Duplicate(usize),
    #[error("clique {0} is empty")]
    EmptyClique(usize),
    #[error("arm index {0} out of range")]
    OutOfRange(usize),
}

impl Error {
    /// True for errors caused by user input (configs, files, parameters).
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::Infeasible { .. }
                | Error::Spec(_)
                | Error::InvalidCover(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
