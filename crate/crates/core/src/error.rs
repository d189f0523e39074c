use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("transform inversion failed: no bracketing root for target {target} on [{lo}, {hi}]")]
    Inversion { target: f64, lo: f64, hi: f64 },

    #[error("no candidate matches the observation within tolerance {tolerance:e}")]
    NoMatch { tolerance: f64 },

    #[error("{count} candidates match the observation within tolerance {tolerance:e}")]
    MultipleMatches { count: usize, tolerance: f64 },

    #[error("enumeration of {count} candidates exceeds the limit of {limit}; reduce n, k or the alphabet")]
    EnumerationGuard { count: f64, limit: f64 },

    #[error("matrix dimension {size} exceeds the eigen-solve cap of {cap}; use a smaller n")]
    SizeCap { size: usize, cap: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of a numerical routine rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::Inversion { .. }
                | Error::NoMatch { .. }
                | Error::MultipleMatches { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
