use thiserror::Error;

/// Errors raised by the simulator, compiler and CLI plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample rate {rate_hz} Hz does not satisfy Nyquist for {max_freq_hz} Hz")]
    Nyquist { rate_hz: f64, max_freq_hz: f64 },

    #[error("envelope duration {duration_s} s exceeds cycle period {period_s} s")]
    EnvelopeTooLong { duration_s: f64, period_s: f64 },

    #[error("IF phase {theta_deg} deg is not a multiple of 45 deg in quantized mode")]
    UnquantizedPhase { theta_deg: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("time step {dt_s} s is too coarse (limit {limit_s} s)")]
    StepTooCoarse { dt_s: f64, limit_s: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("target rotation unreachable: {0}")]
    Unreachable(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepTooCoarse { .. }
                | Error::FitFailed(_)
                | Error::Unreachable(_)
                | Error::NonConvergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
