use thiserror::Error;

/// Errors raised by the model, solvers and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{quantity} = {value} is outside the valid range [{lo}, {hi}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("closure signature violated: inlet rise Z = {0} Pa is negative")]
    NegativeRise(f64),

    #[error("unknown valve `{0}`")]
    UnknownValve(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid scenario:\n{0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_range(quantity: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::Domain {
            quantity,
            value,
            lo,
            hi,
        })
    }
}
