use std::path::Path;

use spanfact_core::Error as CoreError;

/// Command failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Missing, unreadable or malformed input (exit 2).
    #[error("{0}")]
    Input(String),
    /// Divergence, non-finite values or failed gradient checks (exit 3).
    #[error("{0}")]
    Numeric(String),
    /// Invalid or unknown configuration (exit 4).
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Config(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with `context`, keeping the class.
    pub fn context(self, context: impl std::fmt::Display) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{context}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{context}: {m}")),
            CliError::Config(m) => CliError::Config(format!("{context}: {m}")),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let msg = err.to_string();
        match err {
            CoreError::NonFiniteGradient(_) | CoreError::NonFiniteLoss { .. } | CoreError::NonFiniteParameter(_) | CoreError::NonFiniteValue(_) | CoreError::GradientCheck(_) => CliError::Numeric(msg),
            CoreError::InvalidConfig(_) => CliError::Config(msg),
            _ => CliError::Input(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
