use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// The input carries no usable information for the requested operation
    /// (constant frame for Otsu, coincident points for a rigid fit, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Malformed or inconsistent input data (files, frame sequences, schemas).
    #[error("input error: {0}")]
    Input(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("frame {index}: {source}")]
    AtFrame {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a frame index to an error raised while processing that frame.
    pub fn at_frame(self, index: usize) -> Self {
        Error::AtFrame {
            index,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input data rather than processing.
    pub fn is_input(&self) -> bool {
        match self {
            Error::Input(_) | Error::Io { .. } => true,
            Error::AtFrame { source, .. } => source.is_input(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
