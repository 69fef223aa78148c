//! Error type shared by every module of the crate.

/// Crate-wide error enum. Variants are grouped by how the CLI maps them to
/// exit codes: configuration and validation problems exit with 2, numerical
/// failures with 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Potential parameters violate an admissibility requirement.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Grid construction arguments are out of range.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration file parsing or semantic validation failed.
    #[error("config error: {0}")]
    Config(String),

    /// An operation was called for a potential kind that does not support it.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A numerical routine produced an unusable result (singular matrix,
    /// non-finite values, degenerate data).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A verified property of the potential failed with a witness point.
    #[error("axiom violation: {0}")]
    AxiomViolation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidModel(_)
            | Error::InvalidGrid(_)
            | Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Json(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
