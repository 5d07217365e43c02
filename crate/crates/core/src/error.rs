use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Caller broke an API contract (mismatched degree caps, non-unimodular map, ...).
    #[error("{0}")]
    Usage(String),

    /// A square root radicand left the admissible region.
    #[error("{0}")]
    Domain(String),

    #[error("{0}")]
    DegenerateInput(String),

    #[error("normalization failed at (j, t) = ({j}, {t}): {reason} (residual {residual:e})")]
    NormalizationFailure {
        j: f64,
        t: f64,
        residual: f64,
        reason: String,
    },

    #[error("{0}")]
    Precondition(String),

    #[error("{0}")]
    Parse(String),

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, printed as the first token of CLI errors.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::Domain(_) => "domain",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::NormalizationFailure { .. } => "normalization",
            Error::Precondition(_) => "precondition",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    /// Attach a parameter point to a normalization failure raised without one.
    pub(crate) fn at_point(self, j: f64, t: f64) -> Error {
        match self {
            Error::NormalizationFailure {
                residual, reason, ..
            } => Error::NormalizationFailure {
                j,
                t,
                residual,
                reason,
            },
            Error::Domain(msg) => Error::Domain(format!("{msg} at (j, t) = ({j}, {t})")),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
