use std::fmt;

/// Maps onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config files or option values (exit 1).
    Usage(String),
    /// Unreadable or malformed inputs, failed I/O (exit 2).
    Data(String),
    /// A checked invariant did not hold (exit 3).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Internal(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<markerforge::Error> for CliError {
    fn from(e: markerforge::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub trait Context<T> {
    fn data(self, what: &str) -> CliResult<T>;
    fn usage(self, what: &str) -> CliResult<T>;
}

impl<T, E: fmt::Display> Context<T> for Result<T, E> {
    fn data(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Data(format!("{what}: {e}")))
    }

    fn usage(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Usage(format!("{what}: {e}")))
    }
}
