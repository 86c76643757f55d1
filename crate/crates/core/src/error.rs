use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variants map onto the CLI exit codes: `Input`/`Config`/`Io` are usage
/// errors, `Constraint` is a game-definition violation, and `Numerical` /
/// `State` are runtime failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("numerical failure at step {step}: {detail}")]
    Numerical { step: u64, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn constraint(msg: impl Into<String>) -> Self {
        Error::Constraint(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
