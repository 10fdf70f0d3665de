use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: M={0} vs M={1}")]
    GridMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    /// Non-finite values or a blow-up ceiling was hit during time stepping.
    #[error("numerical abort at step {step} (t={t}): {reason}")]
    Numerical { step: usize, t: f64, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
