use std::fmt;
use std::path::Path;

/// Process exit status contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Usage = 2,
    Validation = 3,
    Runtime = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: ExitCode::Usage, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: ExitCode::Validation, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: ExitCode::Runtime, message: message.into() }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::runtime(format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with `context: `.
    pub fn context(mut self, context: impl fmt::Display) -> Self {
        self.message = format!("{context}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ioexai_core::Error> for CliError {
    fn from(e: ioexai_core::Error) -> Self {
        use ioexai_core::Error as E;
        let code = match e {
            E::EmptyCohort | E::Undefined(_) => ExitCode::Runtime,
            _ => ExitCode::Validation,
        };
        Self { code, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
