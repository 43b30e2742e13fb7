use thiserror::Error;

/// Errors raised across detection, attack, and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("degenerate surrogate labels: {0}")]
    DegenerateSurrogate(String),

    #[error("attack initialization failed: {0}")]
    Initialization(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("format error at row {row}, column {column}: {message}")]
    Format {
        row: usize,
        column: String,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
