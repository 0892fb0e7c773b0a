use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("layer {index} ({layer}): {message}")]
    Layer {
        index: usize,
        layer: String,
        message: String,
    },

    #[error("malformed {what} at byte {offset}: {message}")]
    Format {
        what: &'static str,
        offset: usize,
        message: String,
    },

    #[error("dataset error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Shape(_)
            | Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Layer { .. } => ErrorKind::Usage,
            Error::Format { .. } | Error::Data(_) | Error::Io { .. } => ErrorKind::Data,
            Error::Numerical(_) => ErrorKind::Numerical,
        }
    }
}
