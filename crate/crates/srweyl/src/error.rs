use std::io;

/// Errors raised by the command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A core computation rejected its input.
    #[error(transparent)]
    Core(#[from] srweyl_core::Error),
    /// Reading input or writing output failed.
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    /// A JSON document could not be parsed.
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    /// A CSV document could not be parsed.
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    /// A command-line value or file field is malformed.
    #[error("malformed input: {0}")]
    Input(String),
    /// At least one acceptance check failed.
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl CliError {
    /// Process exit code: 1 for failed verification, 2 for everything that
    /// prevents a command from producing its output.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerificationFailed(_) => 1,
            _ => 2,
        }
    }
}

/// Result alias for the command-line layer.
pub type Result<T> = std::result::Result<T, CliError>;
