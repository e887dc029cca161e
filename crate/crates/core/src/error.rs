use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("observation {index}: {what} is not finite")]
    NonFinite { index: usize, what: &'static str },

    #[error("observation {index}: {message}")]
    PreferenceDomain { index: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no observations")]
    Empty,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis size C({d}+{k}, {k}) overflows")]
    BasisOverflow { d: usize, k: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
