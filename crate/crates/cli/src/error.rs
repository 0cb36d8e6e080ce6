use thiserror::Error;

/// Failures of a subcommand, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("selftest failed: {}", .0.join(", "))]
    Selftest(Vec<String>),
    #[error(transparent)]
    Numeric(#[from] grushin_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("threshold failed: {}", .0.join("; "))]
    Threshold(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Selftest(_) => 1,
            CliError::Numeric(grushin_core::Error::SlopeBelowThreshold { .. } | grushin_core::Error::PoorFit(_)) => 3,
            CliError::Numeric(_) | CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Threshold(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
