use plso::PlsoError;
use std::fmt;

/// Command-level failures, carrying the process exit code:
/// 2 usage, 3 data, 4 numerical.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn io(context: &str, err: std::io::Error) -> Self {
        CliError::Data(format!("{context}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<PlsoError> for CliError {
    fn from(err: PlsoError) -> Self {
        match err {
            PlsoError::InvalidParameter(_) => CliError::Usage(err.to_string()),
            PlsoError::DimensionMismatch(_) | PlsoError::LengthNotDivisible { .. } => {
                CliError::Data(err.to_string())
            }
            PlsoError::Numerical(_) => CliError::Numerical(err.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
