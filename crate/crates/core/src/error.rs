use thiserror::Error;

/// Failures raised by the workbench.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("evaluation failed: non-finite value at {point:?}")]
    Evaluation { point: Vec<f64> },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("state diverged at t = {time}")]
    Divergence { time: f64 },
    #[error("input matrix is rank deficient (smallest singular value {sigma_min:e})")]
    Rank { sigma_min: f64 },
    #[error("target is not an assignable equilibrium (residual {residual:e})")]
    NotAssignable { residual: f64 },
    #[error("missing model metadata: {0}")]
    Metadata(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("degenerate network: {0}")]
    DegenerateNetwork(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("wiring error: {0}")]
    Wiring(String),
    #[error("precondition failed: {what} (residual {residual:e})")]
    Precondition { what: String, residual: f64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
