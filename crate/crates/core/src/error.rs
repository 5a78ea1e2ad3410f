use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is singular to working precision (pivot magnitude {pivot:e})")]
    Singular { pivot: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("contraction violated: spectral radius {radius} >= 1 ({context})")]
    Contraction { radius: f64, context: String },

    #[error("assumption check failed: {0}")]
    Assumption(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("insufficient data for rate fit: {usable} usable points, need at least {needed}")]
    InsufficientData { usable: usize, needed: usize },

    #[error("generation failed after {attempts} attempts (seed {seed})")]
    Generation { attempts: usize, seed: u64 },

    #[error("block disagreement in doubled system: {0:e}")]
    BlockDisagreement(f64),

    #[error("line {line}: {message}")]
    Ingestion { line: usize, message: String },

    #[error("descriptor `{0}` could not be parsed")]
    Descriptor(String),

    #[error("instance with seed {seed}: {source}")]
    Instance { seed: u64, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
