use thiserror::Error;

/// Errors raised by the simulator.
///
/// Configuration errors carry the dotted key path of the offending entry so
/// that callers can report them in a machine-parsable way.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
