use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its declared invariant.
    #[error("invalid `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    /// The requested quantity has no solution for these inputs.
    #[error("{op}: {reason}")]
    Domain { op: &'static str, reason: String },

    /// The time grid is too coarse for the dynamics being integrated.
    #[error("{op}: grid too coarse ({reason})")]
    Resolution { op: &'static str, reason: String },

    /// Sequences that must share a grid do not.
    #[error("{op}: shape mismatch ({reason})")]
    Shape { op: &'static str, reason: String },

    /// A fit failed its quality gate.
    #[error("{op}: fit quality too low ({reason})")]
    FitQuality { op: &'static str, reason: String },

    /// Configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation { field, reason: reason.into() }
    }

    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { op, reason: reason.into() }
    }

    pub(crate) fn shape(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Shape { op, reason: reason.into() }
    }

    pub(crate) fn resolution(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Resolution { op, reason: reason.into() }
    }

    pub(crate) fn fit(op: &'static str, reason: impl Into<String>) -> Self {
        Error::FitQuality { op, reason: reason.into() }
    }

    /// True for errors caused by the user's configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Validation { .. } | Error::Json(_))
    }
}
