use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A simulated state left the finite range (or exceeded the divergence
    /// guard). `index` is the position of the offending state.
    #[error("trajectory diverged at state index {index}")]
    Divergence { index: usize },

    /// An optimizer iterate became non-finite; usually the step size is too
    /// large.
    #[error("iterate became non-finite at iteration {iteration}")]
    FitDivergence { iteration: usize },

    #[error("certificate search failed: {0}")]
    SearchFailure(String),

    #[error("empirical covariance is rank deficient (condition number {condition_number:e})")]
    RankDeficient { condition_number: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{skipped} of {total} cells were skipped")]
    TooManySkips { skipped: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
