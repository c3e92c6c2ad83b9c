use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the engine and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (dimension mismatch, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Queue or cache construction was given inconsistent data.
    #[error("initialization error: {0}")]
    Init(String),

    /// Malformed embedding table or results file.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Malformed line in a text file (results, config).
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error for `{key}`: {message}")]
    Config { key: String, message: String },

    /// A single sample could not be processed; carries the stream index.
    #[error("record {index}: {source}")]
    Record {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("synthetic generator: {0}")]
    Synth(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than a bug or I/O failure.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Format { .. } | Error::Parse { .. } | Error::Init(_) | Error::Contract(_) => true,
            Error::Record { source, .. } => source.is_data_error(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
