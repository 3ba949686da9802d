use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RrmError>;

/// Coarse classification used to map errors onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Validation,
    Numerical,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Io => "io",
            ErrorKind::Validation => "validation",
            ErrorKind::Numerical => "numerical",
        }
    }
}

#[derive(Debug, Error)]
pub enum RrmError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rank-deficient weighted design ({features} features, effective sample size {effective_sample_size:.3})")]
    RankDeficient {
        features: usize,
        effective_sample_size: f64,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<RrmError>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
}

impl RrmError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            RrmError::Io { .. } | RrmError::Parse { .. } => ErrorKind::Io,
            RrmError::Input(_) | RrmError::Config(_) => ErrorKind::Validation,
            RrmError::RankDeficient { .. } | RrmError::Degenerate(_) | RrmError::Numerical(_) => {
                ErrorKind::Numerical
            }
            RrmError::AtIteration { source, .. } => source.kind(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        RrmError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RrmError::Io {
            path: path.into(),
            source,
        }
    }
}
