//! Error type of the front end and its mapping to process exit codes.

use repump_core::Error as CoreError;

/// Exit code for success.
pub const EXIT_OK: i32 = 0;
/// Exit code for bad flags, parameters or files.
pub const EXIT_USAGE: i32 = 1;
/// Exit code for a failed numerical verification.
pub const EXIT_NUMERICAL: i32 = 2;
/// Exit code for a failed statistical verification.
pub const EXIT_STATISTICAL: i32 = 3;

/// Front-end failures.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Invalid flags or configuration.
    #[error("usage error: {0}")]
    Usage(String),
    /// A deterministic check exceeded its tolerance.
    #[error("numerical verification failed: {0}")]
    Numerical(String),
    /// A statistical check was significant.
    #[error("statistical verification failed: {0}")]
    Statistical(String),
    /// Error from the numerical core.
    #[error(transparent)]
    Core(#[from] CoreError),
    /// File system failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// Serialisation failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Io(_) | Self::Json(_) => EXIT_USAGE,
            Self::Numerical(_) => EXIT_NUMERICAL,
            Self::Statistical(_) => EXIT_STATISTICAL,
            Self::Core(e) => match e {
                CoreError::InvalidParameter { .. }
                | CoreError::NoSteadyState
                | CoreError::LevelOutOfRange { .. }
                | CoreError::ParameterMismatch(_) => EXIT_USAGE,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}

/// Result alias for the front end.
pub type Result<T> = std::result::Result<T, LabError>;
