use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Spec or data file that does not match its schema.
    #[error("invalid config: {0}")]
    Config(String),
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sim(#[from] rlabm_core::Error),
}

pub type HarnessResult<T> = Result<T, HarnessError>;

impl HarnessError {
    /// 2 for anything the user can fix in their inputs, 1 for failures
    /// while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::MissingFile(_) | HarnessError::Parse { .. } => 2,
            _ => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }
}
