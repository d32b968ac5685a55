use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text; carries the 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A parameter violates its documented domain.
    #[error("invalid parameter `{name}`: {msg}")]
    Parameter { name: &'static str, msg: String },

    /// Matrix or series dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Requested model order exceeds the numerical rank of the data.
    #[error("rank deficiency: {0}")]
    Rank(String),

    /// Two inputs that must share a time base do not.
    #[error("misaligned time bases: {0}")]
    Alignment(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn parameter(name: &'static str, msg: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
