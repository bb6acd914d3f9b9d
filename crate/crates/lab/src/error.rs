use std::fmt;

/// Failure of a run. Configuration and IO problems map to exit code 2,
/// numerical failures to exit code 1.
#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config(String),
    Io(String),
    Compute(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 2,
            RunError::Compute(_) => 1,
        }
    }

    pub(crate) fn compute(e: impl fmt::Display) -> Self {
        RunError::Compute(e.to_string())
    }

    pub(crate) fn config(e: impl fmt::Display) -> Self {
        RunError::Config(e.to_string())
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Io(m) => write!(f, "io error: {m}"),
            RunError::Compute(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}
