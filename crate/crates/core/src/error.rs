use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("singular system: zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error(
        "non-finite state at step {step} ({stage}, inner iteration {iteration}); last good time t = {last_good_time}"
    )]
    NonFinite {
        step: usize,
        stage: &'static str,
        iteration: usize,
        last_good_time: f64,
    },

    #[error("non-positive concentration {value} at node {node} of species {species}")]
    NonPositiveConcentration {
        species: usize,
        node: usize,
        value: f64,
    },

    #[error("inconclusive order: successive difference {difference:e} is at round-off level of {scale:e}")]
    InconclusiveOrder { difference: f64, scale: f64 },

    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    ConfigKey { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn key(key: &str, message: impl Into<String>) -> Self {
        Error::ConfigKey {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// True for errors that come from the numerics rather than from input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. }
                | Error::NonFinite { .. }
                | Error::NonPositiveConcentration { .. }
                | Error::InconclusiveOrder { .. }
                | Error::NotConverged { .. }
        )
    }

    /// True for configuration and parameter-validation errors.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::ConfigSyntax { .. } | Error::ConfigKey { .. }
        )
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}
