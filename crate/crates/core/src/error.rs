use thiserror::Error;

use crate::spectra::GaussianPeak;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration is internally inconsistent (record too short, gate out of range, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An estimator is undefined for the supplied data (zero variance, zero mean, too few samples).
    #[error("estimator undefined: {0}")]
    Undefined(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("fit did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        partial: Vec<GaussianPeak>,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn undefined(msg: impl Into<String>) -> Error {
    Error::Undefined(msg.into())
}
