use thiserror::Error;

/// Exit code of a run that ended above the energy ceiling.
pub const EXIT_CEILING: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config keys or values.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Numerical(#[from] willmore_core::Error),
    /// A run that completed but failed its own checks.
    #[error("{0}")]
    Failed(String),
    #[error("{0}")]
    Ceiling(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Numerical(willmore_core::Error::InvalidOptions(_)) => 2,
            Self::Io(_) | Self::Numerical(_) | Self::Failed(_) => 1,
            Self::Ceiling(_) => EXIT_CEILING,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }
}
