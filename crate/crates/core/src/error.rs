use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Input data does not satisfy an operation's precondition.
    #[error("{0}")]
    InvalidInput(String),

    /// A persisted artifact does not match the data or index it is used with.
    #[error("stale artifact: {0}")]
    Stale(String),

    #[error("invariant breach: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    /// Process exit code: 2 config, 3 data, 4 invariant breach.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Invariant(_) => 4,
            _ => 3,
        }
    }
}
