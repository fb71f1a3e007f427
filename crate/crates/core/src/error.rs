use thiserror::Error;

/// Errors raised across the optimizer, problem suite and harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite gradient component {index}: {value}")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("eigenvalue list is empty")]
    EmptySpectrum,

    #[error("normal equations are numerically singular (condition estimate {0:e})")]
    SingularSystem(f64),

    #[error("negative learning-rate gap {value:e} at coordinate {index}")]
    NegativeGap { index: usize, value: f64 },

    #[error("step {step}: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("insufficient seeds: need at least {need}, got {got}")]
    InsufficientSeeds { need: usize, got: usize },

    #[error("horizon too short: need at least {need}, got {got}")]
    HorizonTooShort { need: u64, got: u64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn at_step(self, step: u64) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
