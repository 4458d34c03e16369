//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its physical domain. Names the offending
    /// field and states the violated constraint.
    #[error("parameter out of domain: {field}: {constraint}")]
    ParameterDomain {
        field: &'static str,
        constraint: String,
    },

    /// A frequency grid is too coarse for the requested integral.
    #[error("grid under-resolved: {0}")]
    Resolution(String),

    /// Readout calibration traces are statistically indistinguishable, so
    /// the transfer estimator is degenerate.
    #[error("estimator degenerate: bright/dark calibration separation {separation:.3} counts is below {required:.3}")]
    EstimatorDegenerate { separation: f64, required: f64 },

    /// Scenario file could not be parsed.
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    /// Scenario parsed but violates an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(field: &'static str, constraint: impl Into<String>) -> Self {
        Error::ParameterDomain {
            field,
            constraint: constraint.into(),
        }
    }

    /// Process exit code per interface contract: 1 for input/validation
    /// problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ParameterDomain { .. } | Error::Parse { .. } | Error::Validation(_) => 1,
            _ => 2,
        }
    }
}
