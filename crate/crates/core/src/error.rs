use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("found {found} of {wanted} returns to {cylinder} within the cap of {cap} steps")]
    CapExceeded {
        cylinder: String,
        wanted: usize,
        found: usize,
        cap: u64,
    },
    #[error("point at time {time} matches branches {first} and {second}")]
    AmbiguousBranch {
        time: i64,
        first: usize,
        second: usize,
    },
    #[error("excursion product at return {at} is not monomial (relative residual {residual:e})")]
    NonDiagonal { at: usize, residual: f64 },
    #[error("class search exceeded the budget of {budget} nodes")]
    ClassSearchTimeout { budget: u64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Unsupported(_) | Error::Config(_) | Error::Json(_) => 2,
            Error::CapExceeded { .. } | Error::ClassSearchTimeout { .. } => 3,
            Error::AmbiguousBranch { .. } | Error::NonDiagonal { .. } | Error::Invariant(_) => 4,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
