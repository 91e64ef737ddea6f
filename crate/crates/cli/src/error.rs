use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] lv_optctl::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    /// Process exit code: 1 solver or check failure, 2 bad input, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) | CliError::CheckFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Csv(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
