use std::fmt;

/// Errors reported by the fitting and inference routines.
#[derive(Debug, Clone, PartialEq)]
pub enum PlsoError {
    /// A parameter violates its documented domain (non-positive variance,
    /// frequency outside [0, pi], empty candidate list, ...).
    InvalidParameter(String),
    /// Array shapes do not agree between related inputs.
    DimensionMismatch(String),
    /// The record length is not a whole number of windows. Callers must
    /// truncate or pad; the model is only defined for K = M * N.
    LengthNotDivisible { len: usize, window_len: usize },
    /// A computation produced a non-finite or degenerate value that valid
    /// inputs cannot reach.
    Numerical(String),
}

impl fmt::Display for PlsoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlsoError::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            PlsoError::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            PlsoError::LengthNotDivisible { len, window_len } => write!(
                f,
                "record length {len} is not divisible by window length {window_len}; \
                 truncate or pad the record"
            ),
            PlsoError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for PlsoError {}

pub type Result<T> = std::result::Result<T, PlsoError>;
