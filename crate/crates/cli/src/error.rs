use std::fmt;

use lmsz_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration, bad flags, failed preconditions.
    Config(String),
    /// Output could not be written.
    Io(String),
    /// The validation battery ran and at least one criterion failed.
    Validation(String),
    Core(CoreError),
}

impl CliError {
    pub fn field(path: &str, msg: impl fmt::Display) -> Self {
        CliError::Config(format!("{path}: {msg}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Validation(_) => 1,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &CoreError) -> u8 {
    match e {
        CoreError::NonConvergence { .. }
        | CoreError::ToleranceNotMet { .. }
        | CoreError::StepSizeUnderflow { .. }
        | CoreError::AccuracyLoss { .. } => 3,
        CoreError::Realization { source, .. } => core_exit_code(source),
        _ => 2,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
