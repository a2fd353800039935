use thiserror::Error;

/// Errors raised by the association library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssocError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// No valid association satisfies the constraints.
    #[error("problem is infeasible")]
    Infeasible,

    /// The association references a pair that is absent from the cost structure.
    #[error("pair ({row}, {col}) is not present in the cost matrix")]
    AbsentPair { row: usize, col: usize },

    #[error("enumeration would visit {count} associations, above the limit of {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("dual state violation: {0}")]
    DualViolation(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for AssocError {
    fn from(e: std::io::Error) -> Self {
        AssocError::Io(e.to_string())
    }
}

impl From<csv::Error> for AssocError {
    fn from(e: csv::Error) -> Self {
        AssocError::Io(e.to_string())
    }
}

impl AssocError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AssocError::InvalidInput(msg.into())
    }
}

pub type Result<T, E = AssocError> = std::result::Result<T, E>;
