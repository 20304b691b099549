use thiserror::Error;

/// Errors raised by the measure toolkit, the samplers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevyError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("quadrature did not converge on [{a}, {b}]: {detail}")]
    Quadrature { a: f64, b: f64, detail: String },

    #[error("inversion failed: {0}")]
    Inversion(String),

    #[error("not enough jumps: needed {needed} {kind} jumps above the cutoff, found {found}")]
    InsufficientJumps {
        kind: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("finite activity: {0}")]
    FiniteActivity(String),

    #[error("standing assumption violated: {0}")]
    Assumption(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LevyError {
    fn from(e: std::io::Error) -> Self {
        LevyError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LevyError {
    fn from(e: serde_json::Error) -> Self {
        LevyError::Config(e.to_string())
    }
}

impl From<csv::Error> for LevyError {
    fn from(e: csv::Error) -> Self {
        LevyError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LevyError>;

pub(crate) fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(LevyError::Domain(format!("{name} must be positive, got {x}")))
    }
}
