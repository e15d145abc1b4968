use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input text or records could not be interpreted.
    Malformed { line: usize, reason: String },
    /// An input that must contain at least one item was empty.
    Empty(&'static str),
    /// Tensor or vector dimensions disagree.
    Shape { context: &'static str, expected: usize, found: usize },
    /// A configuration value is out of range.
    InvalidConfig(String),
    /// A gradient or parameter went NaN/Inf.
    NonFinite { tensor: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Malformed { line, reason } => write!(f, "malformed input at line {line}: {reason}"),
            Error::Empty(what) => write!(f, "empty {what}"),
            Error::Shape { context, expected, found } => {
                write!(f, "shape mismatch in {context}: expected {expected}, found {found}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NonFinite { tensor } => write!(f, "non-finite values in tensor `{tensor}`"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { context, expected, found })
    }
}
