use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry encountered in {0}")]
    NonFinite(&'static str),

    #[error("{op} did not converge on a {rows}x{cols} input")]
    NonConvergence {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    AboveCap { dim: usize, cap: usize },

    #[error("singular input: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("operator is not unitary (max deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("contraction cost {cost:.3e} exceeds the budget {budget:.3e}")]
    BudgetExceeded { cost: f64, budget: f64 },

    /// Born probabilities of a measurement do not sum to one; this only
    /// happens when the state was corrupted upstream.
    #[error("measurement probabilities sum to {0}, expected 1")]
    ProbabilityMismatch(f64),

    #[error("malformed MPS container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical kernels themselves (as opposed to
    /// bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NonConvergence { .. }
                | Error::Singular(_)
                | Error::NonUnitary(_)
                | Error::ProbabilityMismatch(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
