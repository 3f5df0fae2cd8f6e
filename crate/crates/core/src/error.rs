use thiserror::Error;

/// Errors raised by the aggregation rules, the noise model and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated (shape, range, empty input).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("embedding row {row} has Euclidean norm {norm}, expected 1")]
    EmbeddingRowNorm { row: usize, norm: f64 },

    #[error("embedding row {row} has no non-zero component")]
    EmbeddingRowZero { row: usize },

    /// The likelihood weights sum to (almost) zero, so the weighted average is undefined.
    #[error("degenerate likelihood weights: total {total:e}")]
    DegenerateWeights { total: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
