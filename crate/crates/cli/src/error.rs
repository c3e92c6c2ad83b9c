use std::fmt;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
    /// The reader of stdout went away (e.g. `| head`); not a failure.
    Closed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Internal(_) => EXIT_INTERNAL,
            CliError::Closed => EXIT_OK,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::Closed => write!(f, "stdout closed"),
        }
    }
}

impl From<coevo_core::Error> for CliError {
    fn from(e: coevo_core::Error) -> Self {
        use coevo_core::Error;
        match e {
            Error::Config { .. } | Error::Synth(_) => CliError::Usage(e.to_string()),
            Error::Io { .. } => CliError::Data(e.to_string()),
            ref other if other.is_data_error() => CliError::Data(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
