use std::fmt;

/// Failure of a run, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or inconsistent parameters (exit 2).
    Config(String),
    /// A quadrature missed its tolerance (exit 3); carries the best effort.
    Accuracy { estimate: f64, error_bound: f64, subdivisions: usize },
    /// Anything else (exit 1).
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Accuracy { .. } => 3,
            CliError::Other(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config_error",
            CliError::Accuracy { .. } => "accuracy_error",
            CliError::Other(_) => "error",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Other(msg) => f.write_str(msg),
            CliError::Accuracy { estimate, error_bound, subdivisions } => write!(
                f,
                "accuracy target not met: best estimate {estimate:e} (error bound {error_bound:e}) \
                 after {subdivisions} subdivisions"
            ),
        }
    }
}

impl From<lpavg_core::Error> for CliError {
    fn from(e: lpavg_core::Error) -> Self {
        use lpavg_core::Error;
        match e {
            Error::Domain(_) | Error::Config(_) => CliError::Config(e.to_string()),
            Error::Accuracy { estimate, error_bound, subdivisions } => {
                CliError::Accuracy { estimate, error_bound, subdivisions }
            }
            Error::NonFinite { .. } => CliError::Other(e.to_string()),
        }
    }
}

impl From<lpavg_core::expr::ExprError> for CliError {
    fn from(e: lpavg_core::expr::ExprError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("i/o error: {e}"))
    }
}
