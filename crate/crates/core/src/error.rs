use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible count vector: sum of j*c_j is {sum}, expected {m}")]
    Infeasible { sum: u64, m: u64 },

    #[error("size limit exceeded: {what} = {value}, limit is {limit}")]
    SizeLimit {
        what: &'static str,
        value: u64,
        limit: u64,
    },

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("invalid chord sequence at step {index}: {reason}")]
    InvalidSequence { index: usize, reason: String },

    #[error("invalid bilabelled tree: {0}")]
    Structure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The requested work exceeds a configured budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("root finding failed: {0}")]
    Convergence(String),

    /// An exact computation produced an inconsistent result.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
