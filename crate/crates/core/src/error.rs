use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A non-finite value appeared while evaluating layer `layer` (0-based).
    #[error("non-finite value in layer {layer}: {context}")]
    Numeric { layer: usize, context: String },

    #[error("degenerate importance ratio: target probability {prob:e} below 1e-12")]
    DegenerateRatio { prob: f64 },

    #[error("degenerate support: reference probability {prob:e} at an observed sample")]
    DegenerateSupport { prob: f64 },

    #[error("unsupported game: {0}")]
    UnsupportedGame(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{}:{line}: {msg}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    /// A run aborted while processing environment step `step`.
    #[error("run failed at step {step}: {source}")]
    Run { step: u64, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(file: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}
