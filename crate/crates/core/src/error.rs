use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A model or configuration violates one of its invariants.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// A computation would exceed a configured size cap.
    #[error("too large: {what} ({size} > cap {cap})")]
    TooLarge { what: &'static str, size: u128, cap: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand for `Err(Error::InvalidInput(..))`.
macro_rules! invalid {
    ($($arg:tt)*) => {
        Err($crate::error::Error::InvalidInput(format!($($arg)*)))
    };
}
pub(crate) use invalid;

/// Fails unless `x` is finite.
pub(crate) fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        invalid!("{name} must be finite, got {x}")
    }
}
