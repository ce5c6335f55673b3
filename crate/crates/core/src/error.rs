use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("inadmissible component code: {0}")]
    Inadmissible(String),

    #[error("code dimension {k} too large for exhaustive enumeration (limit {limit})")]
    DimensionTooLarge { k: usize, limit: usize },

    #[error("problem size exceeds the exact enumeration limit: {0}")]
    SizeLimit(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("inconsistent segment payloads at position {0}")]
    InconsistentPayload(usize),

    #[error("rejection sampling found no admissible matrix after {0} draws")]
    RejectionLimit(u64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible rate: {0}")]
    InfeasibleRate(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
