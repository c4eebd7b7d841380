//! Library surface of the pipeline binary, reused by the integration and
//! acceptance tests.

pub mod config;
pub mod export;
pub mod ingest;
pub mod manifest;
pub mod pipeline;

/// CLI-level errors carrying the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    #[error("config error: {0}")]
    Config(String),
    /// Numerical failure in a pipeline stage (exit 3).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// File-system or format failure (exit 4).
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
