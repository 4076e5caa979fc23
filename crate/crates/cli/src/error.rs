use std::fmt;

/// Failure of a command, split by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad arguments, failed preconditions, unreadable input or unwritable
    /// output. Exit code 2.
    Usage(String),
    /// A verification check did not pass. Exit code 1.
    Check(String),
    /// The computation itself failed. Exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Check(_) | CliError::Runtime(_) => 1,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("cannot write {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gaflab::Error> for CliError {
    fn from(e: gaflab::Error) -> Self {
        match &e {
            gaflab::Error::Domain { field, reason } => CliError::Usage(format!("`{field}`: {reason}")),
            gaflab::Error::Io(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
