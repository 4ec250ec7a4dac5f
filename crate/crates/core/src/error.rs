//! Crate-wide error type.
//!
//! The taxonomy mirrors the exit codes of the command-line harness:
//! precondition/domain failures versus numerical failures (convergence,
//! resolution, scheme violations).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter violated a precondition. Carries the offending field.
    #[error("domain error in `{field}`: {msg}")]
    Domain { field: String, msg: String },

    /// A quadrature or iteration failed to reach its tolerance. Carries the
    /// best value and error estimate when one is available.
    #[error("convergence error: {msg}")]
    Convergence {
        msg: String,
        best: Option<f64>,
        err_est: Option<f64>,
    },

    /// A series/truncation cap was exceeded; carries advice where possible.
    #[error("resolution error: {msg}")]
    Resolution { msg: String },

    /// A Keller-Osserman style admissibility condition failed.
    #[error("Keller-Osserman violation: {msg}")]
    KoViolation { msg: String },

    /// A provably monotone scheme produced a non-monotone sequence beyond
    /// tolerance; signals a configuration bug, not a numerical accident.
    #[error("scheme violation: {msg}")]
    SchemeViolation { msg: String },

    /// A geometric construction (interpolant, bracket, ...) failed.
    #[error("construction error: {msg}")]
    Construction { msg: String },

    /// A user-supplied field could not be evaluated where needed.
    #[error("evaluation error at {location:?}: {msg}")]
    Evaluation { msg: String, location: Vec<f64> },
}

impl Error {
    pub fn domain(field: &str, msg: impl Into<String>) -> Self {
        Error::Domain {
            field: field.to_string(),
            msg: msg.into(),
        }
    }

    pub fn convergence(msg: impl Into<String>) -> Self {
        Error::Convergence {
            msg: msg.into(),
            best: None,
            err_est: None,
        }
    }

    pub fn convergence_with(msg: impl Into<String>, best: f64, err_est: f64) -> Self {
        Error::Convergence {
            msg: msg.into(),
            best: Some(best),
            err_est: Some(err_est),
        }
    }

    pub fn resolution(msg: impl Into<String>) -> Self {
        Error::Resolution { msg: msg.into() }
    }

    pub fn ko_violation(msg: impl Into<String>) -> Self {
        Error::KoViolation { msg: msg.into() }
    }

    pub fn scheme_violation(msg: impl Into<String>) -> Self {
        Error::SchemeViolation { msg: msg.into() }
    }

    pub fn construction(msg: impl Into<String>) -> Self {
        Error::Construction { msg: msg.into() }
    }

    /// True for errors that map to "bad input" rather than "numerics failed".
    pub fn is_precondition(&self) -> bool {
        matches!(self, Error::Domain { .. } | Error::KoViolation { .. })
    }
}
