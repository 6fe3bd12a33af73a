use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A model or run configuration violates a precondition.
    #[error("configuration error: {0}")]
    Config(String),
    /// Caller misuse: mismatched grids, unordered tags, overlapping groups.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("measurement error: {0}")]
    Measurement(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("fit error: {message} (residual {residual:.6e})")]
    Fit { message: String, residual: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn analysis(msg: impl Into<String>) -> Self {
        Error::Analysis(msg.into())
    }

    pub(crate) fn fit(msg: impl Into<String>, residual: f64) -> Self {
        Error::Fit {
            message: msg.into(),
            residual,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
