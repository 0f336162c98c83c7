use std::fmt;

/// Failure of a command, mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, malformed files or model errors (exit 2).
    Input(String),
    /// Sampler finished but diagnostics failed; outputs are still written (exit 3).
    Convergence(String),
    /// Reading or writing files failed (exit 4).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Convergence(m) => write!(f, "convergence check failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<bayes_cox::Error> for CliError {
    fn from(e: bayes_cox::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

pub(crate) fn io_error(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
