use thiserror::Error;

/// Errors surfaced by model construction, evaluation and fitting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {context}: argument {value} is outside the valid domain")]
    Domain { context: &'static str, value: f64 },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("covariate dimension mismatch (expected {expected}, got {actual})")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: &'static str, detail: String },

    #[error("optimizer failed to converge after {iterations} iterations (|grad|={grad_norm:.3e})")]
    OptimFailure { iterations: usize, grad_norm: f64 },

    #[error("root bracketing failed for {context} on [{lo}, {hi}]")]
    Bracketing { context: &'static str, lo: f64, hi: f64 },

    #[error("need at least {needed} distinct failure times for {k} cut points, found {found}")]
    TooFewFailures { needed: usize, found: usize, k: usize },

    #[error("all {0} bootstrap replicates failed to converge")]
    AllReplicatesFailed(usize),

    #[error("csv error at row {row}: {detail}")]
    Csv { row: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
