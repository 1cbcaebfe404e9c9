use thiserror::Error;

/// Errors produced by the numerics and the closed-loop simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The bound denominator vanished; the test-point carries no information.
    #[error("no valid bound at this test-point")]
    NoValidBound,

    #[error("degenerate posterior{}", step.map(|k| format!(" at step {k}")).unwrap_or_default())]
    DegeneratePosterior { step: Option<usize> },

    #[error("no valid policy: every candidate selection was rejected")]
    NoPolicy,

    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
