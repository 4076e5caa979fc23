use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument is outside the operation's domain.
    #[error("domain error in `{field}`: {reason}")]
    Domain { field: &'static str, reason: String },

    /// The argument-principle quadrature did not settle, which means a zero
    /// sits too close to the contour.
    #[error("zero near contour |z| = {radius}: winding quadrature did not converge with {nodes} nodes")]
    ZeroNearContour { radius: f64, nodes: usize },

    /// Root extraction and argument-principle counting disagree.
    #[error("zero count mismatch in D_{radius}: eigenvalues give {eigen}, winding gives {winding}")]
    CountMismatch {
        radius: f64,
        eigen: usize,
        winding: i64,
    },

    /// Input makes the requested quantity undefined (e.g. log|f(0)| with f(0) = 0).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Not enough usable data points (rate fits, estimators).
    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }

    /// Name of the offending field for domain errors.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            Error::Domain { field, .. } => Some(field),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
