use thiserror::Error;

/// Failures of a command-line run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Invariant(_) => 3,
            RunError::Resource(_) => 4,
            RunError::Io(_) | RunError::Csv(_) | RunError::Json(_) => 1,
        }
    }
}

impl From<meanfield_core::error::Error> for RunError {
    fn from(e: meanfield_core::error::Error) -> Self {
        use meanfield_core::error::Error as E;
        match e {
            E::Config(m) | E::Usage(m) => RunError::Config(m),
            E::Numeric(m) | E::Invariant(m) => RunError::Invariant(m),
            E::Resource(m) => RunError::Resource(m),
        }
    }
}

pub type Result<T> = std::result::Result<T, RunError>;
