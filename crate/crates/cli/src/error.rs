use std::process::ExitCode;

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("config validation error: {0}")]
    Invalid(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] dyadic_core::Error),

    #[error("acceptance failure: {0}")]
    Acceptance(String),

    #[error("sweep run {message}")]
    Sweep { status: u8, message: String },

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    /// A core error met while validating input.
    pub fn config(e: dyadic_core::Error) -> Self {
        CliError::Invalid(e.to_string())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn exit_status(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Acceptance(_) => 4,
            CliError::Sweep { status, .. } => *status,
            CliError::Io { .. } => 1,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.exit_status())
    }
}
