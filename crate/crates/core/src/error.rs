use thiserror::Error;

/// Errors raised by the market model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("kernel is singular at (t={t}, s={s})")]
    SingularPoint { t: f64, s: f64 },

    #[error("unsupported kernel regime in {op}: {msg}")]
    UnsupportedRegime { op: &'static str, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge after {panels} panels (estimate {estimate}, error {error})")]
    Quadrature {
        panels: usize,
        estimate: f64,
        error: f64,
    },

    #[error("kernel matrix is rank deficient at t={t} (smallest singular value {min_singular_value})")]
    Incomplete { t: f64, min_singular_value: f64 },

    #[error("drifts are inconsistent with the kernel matrix (residual {residual}, tolerance {tolerance})")]
    ArbitrageInconsistent { residual: f64, tolerance: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("at grid index {index}: {source}")]
    AtGridIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn at_index(self, index: usize) -> Self {
        Error::AtGridIndex {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
