use thiserror::Error;

use crate::deriv::Deriv;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("sample count {count} on axis {axis} is below 2; endpoints cannot be included")]
    TooFewSamples { axis: usize, count: usize },

    #[error("axis {axis} has zero width")]
    ZeroWidth { axis: usize },

    #[error("point {point:?} lies outside subdomain {subdomain}")]
    PointOutside { subdomain: usize, point: Vec<f64> },

    #[error("derivative {0} was not evaluated")]
    MissingDerivative(Deriv),

    #[error("derivative {0} is not supported (total order must be at most 2)")]
    UnsupportedDerivative(String),

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("empty point set")]
    EmptyPointSet,

    #[error("boundary point {0} has no owning subdomain")]
    MissingOwner(usize),

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("row block width {found} does not match system width {expected}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("problem has no nonlinear term")]
    NotNonlinear,

    #[error("problem has a nonlinear term; use a nonlinear driver")]
    NotLinear,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("least-squares factorization failed: {0}")]
    Factorization(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::InvalidDomain(_)
                | Error::DimensionMismatch { .. }
                | Error::TooFewSamples { .. }
                | Error::UnknownProblem(_)
                | Error::Expression(_)
                | Error::UnsupportedDerivative(_)
                | Error::Json(_)
        )
    }
}
