use std::path::PathBuf;

/// Failures of a run, a sweep or a ledger check, each with its exit status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ledger format error in {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] bvdp_core::Error),
    #[error("step failed: {0}")]
    FailedStep(String),
    #[error("check failed: {0}")]
    FailedCheck(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::FailedStep(_) => 2,
            RunError::FailedCheck(_) => 3,
            RunError::Config(_) => 4,
            RunError::Core(bvdp_core::Error::Parameter(_) | bvdp_core::Error::Geometry(_) | bvdp_core::Error::Setup(_)) => 4,
            RunError::Io { .. } | RunError::Format { .. } | RunError::Core(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| RunError::Io { path, source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        RunError::Format { path: path.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, RunError>;
