use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invariant violated in {context}: residual {residual:e}")]
    InvariantViolation { context: String, residual: f64 },
    #[error("linear system is singular or factorization failed: {0}")]
    Singular(String),
    #[error("dimension {dim} exceeds dense-path limit {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("eigensolver failed to converge: {0}")]
    EigenFailure(String),
    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),
    #[error("weight construction failed: {0}")]
    WeightConstruction(String),
    #[error("sub-ellipticity certification failed: {0}")]
    CertificationFailed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed input file {path}: {msg}")]
    MalformedInput { path: String, msg: String },
}

impl Error {
    /// Exit-code class: 1 for validation problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidModel(_)
            | Error::InvalidGrid(_)
            | Error::InvalidConfig(_)
            | Error::Precondition(_)
            | Error::Io(_)
            | Error::MalformedInput { .. }
            | Error::DimensionTooLarge { .. } => 1,
            Error::InvariantViolation { .. }
            | Error::Singular(_)
            | Error::EigenFailure(_)
            | Error::DegenerateTrace(_)
            | Error::WeightConstruction(_)
            | Error::CertificationFailed(_) => 2,
        }
    }
}
