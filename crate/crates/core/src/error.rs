use thiserror::Error;

/// Errors raised by the simulator and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("step rejected: {reason}; suggested dt = {suggested_dt:.3e}")]
    StepRejected { reason: String, suggested_dt: f64 },
    #[error("eigensolve failed: {0}")]
    Eigen(String),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for errors caused by bad user input rather than by the dynamics.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::UnsupportedRegime(_) | Error::GridMismatch(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::GridMismatch(format!(
            "{what}: length {got}, expected {want}"
        )));
    }
    Ok(())
}
