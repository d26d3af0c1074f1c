use std::io;

use thiserror::Error;

/// Errors produced by every stage of the separation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A structured file could not be parsed. `field` names the offending
    /// field or location (line number, key, chunk id).
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    /// Validation of a manifest or config found one or more violations.
    #[error("configuration has {} violation(s): {}", .0.len(), .0.join("; "))]
    Config(Vec<String>),

    #[error("degenerate reference set: {0}")]
    DegenerateReferences(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
