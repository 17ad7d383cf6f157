use thiserror::Error;

/// Errors raised by the numerical routines and the density constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// A series or continued fraction did not converge.
    #[error("{op} did not converge after {iterations} iterations")]
    ConvergenceFailure { op: &'static str, iterations: usize },

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error("quadrature did not reach tolerance {tolerance:e} (error estimate {estimate:e}) in {op}")]
    QuadratureNonConvergence {
        op: &'static str,
        tolerance: f64,
        estimate: f64,
    },

    /// The bump perturbation does not fit inside [0, 7/8] for this bandwidth.
    #[error("bandwidth {b} too large for the bump construction: {detail}")]
    BandwidthTooLarge { b: f64, detail: String },

    /// The mollifier compensation mass came out negative.
    #[error("mollifier compensation mass is negative ({mass})")]
    NegativeMass { mass: f64 },

    /// A rejection-sampler proposal exceeded the density envelope.
    #[error("pdf value {value} at x = {x} exceeds the sampling envelope {envelope}")]
    EnvelopeViolation { x: f64, value: f64, envelope: f64 },

    /// A density specification could not be interpreted.
    #[error("invalid density specification: {0}")]
    InvalidSpec(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    /// True for failures of the numerics (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConvergenceFailure { .. }
                | Error::QuadratureNonConvergence { .. }
                | Error::NegativeMass { .. }
                | Error::EnvelopeViolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
