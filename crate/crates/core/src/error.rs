use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A combination of parameters violates a structural invariant
    /// (for example a full ball requested for an odd-numerator exponent).
    #[error("configuration error: {0}")]
    Config(String),
    /// Adaptive quadrature ran out of subdivisions before reaching the
    /// requested tolerance. Carries the best estimate found.
    #[error(
        "accuracy target not met: estimate {estimate} with error bound {error_bound} \
         after {subdivisions} subdivisions"
    )]
    Accuracy {
        estimate: f64,
        error_bound: f64,
        subdivisions: usize,
    },
    /// The integrand produced NaN or an infinity.
    #[error("integrand is not finite at x = {at}")]
    NonFinite { at: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl Error {
    /// Rescales the best estimate of an accuracy error; other variants pass through.
    pub fn scaled(self, factor: f64) -> Self {
        match self {
            Error::Accuracy { estimate, error_bound, subdivisions } => Error::Accuracy {
                estimate: estimate * factor,
                error_bound: error_bound * factor.abs(),
                subdivisions,
            },
            other => other,
        }
    }
}
