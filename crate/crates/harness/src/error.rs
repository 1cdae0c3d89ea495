use thiserror::Error;

use mps_ensembles_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing columns: {}", .0.join("; "))]
    MissingColumns(Vec<String>),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit code: 2 config, 3 budget, 4 numerical, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::MissingColumns(_) | HarnessError::Insufficient(_) => 2,
            HarnessError::Json(_) => 2,
            HarnessError::Core(e) => core_exit_code(e),
            HarnessError::Io(_) | HarnessError::Csv(_) => 1,
        }
    }
}

pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::BudgetExceeded { .. } => 3,
        CoreError::Io(_) => 1,
        e if e.is_numerical() => 4,
        _ => 2,
    }
}
