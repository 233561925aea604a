use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix did not have the size an operation requires.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension { context: String, expected: usize, got: usize },

    /// A scalar parameter was outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An input violated an operation's contract (e.g. a negative multiplier).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A value was outside the domain of a function (e.g. log of a nonpositive number).
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrator could not continue.
    #[error("integration fault at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// Not enough data to fit a rate.
    #[error("rate estimation failed: {0}")]
    Estimation(String),

    /// A problem file could not be understood.
    #[error("problem file error: {0}")]
    Parse(String),

    /// Unknown registry entry.
    #[error("unknown problem: {0}")]
    UnknownProblem(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the command-line runner: 2 for bad input, 3 for
    /// numerical faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Integration { .. } | Error::Estimation(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(context: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { context: context.to_string(), expected, got });
    }
    Ok(())
}
