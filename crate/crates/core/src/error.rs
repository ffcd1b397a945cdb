use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian: {0}")]
    Singular(String),

    #[error("non-hyperbolic rest point: eigenvalue {eigenvalue:e} within ±{threshold:e} of zero")]
    NonHyperbolic { eigenvalue: f64, threshold: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },

    #[error("assembly mismatch: {0}")]
    AssemblyMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate connection: {0}")]
    Degenerate(String),

    #[error("energy level {level} is not regular: stationary energy {energy} of {id} is within {tolerance:e}")]
    NonRegularLevel {
        level: f64,
        energy: f64,
        id: String,
        tolerance: f64,
    },

    #[error("uncertified orbit counts: {0}")]
    Uncertified(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("validation failure: {0}")]
    Validation(String),

    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

/// Rejects NaN and infinities with a numeric error naming `what`.
pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::numeric(format!("{what} is not finite ({value})")))
    }
}
