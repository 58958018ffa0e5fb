use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the sampler.
#[derive(Debug, Error)]
pub enum EssError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: row {row}, column {col}: cannot parse {value:?} as a number")]
    Parse {
        file: PathBuf,
        row: usize,
        col: usize,
        value: String,
    },

    #[error("{file}: row {row} has {found} columns, expected {expected}")]
    RaggedRow {
        file: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("{0}: file contains no data rows")]
    EmptyFile(PathBuf),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("design column {0} has zero variance")]
    ZeroVariance(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("at sweep {sweep}: {source}")]
    AtSweep {
        sweep: usize,
        #[source]
        source: Box<EssError>,
    },
}

impl EssError {
    pub fn config(msg: impl Into<String>) -> Self {
        EssError::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        EssError::Numeric(msg.into())
    }

    /// Broad category used for CLI exit codes and FFI status values.
    pub fn kind(&self) -> ErrorKind {
        match self {
            EssError::Config(_) => ErrorKind::Config,
            EssError::Numeric(_) => ErrorKind::Numeric,
            EssError::AtSweep { source, .. } => source.kind(),
            EssError::Io { .. } | EssError::Checkpoint(_) => ErrorKind::Io,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
    Io,
}

pub type Result<T> = std::result::Result<T, EssError>;
