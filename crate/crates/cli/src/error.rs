use thiserror::Error;

/// Exit status for a bad config or command line.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for a failure while running an experiment.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("io: {0}")]
    Io(String),
    /// Failure inside a module, prefixed with the module name.
    #[error("{module}: {message}")]
    Runtime { module: &'static str, message: String },
}

impl CliError {
    pub fn runtime(module: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Runtime {
            module,
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) | CliError::Runtime { .. } => EXIT_RUNTIME,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
