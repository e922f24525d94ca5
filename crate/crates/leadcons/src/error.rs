use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures of the front end. Each maps to a process exit code.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("{}: {source}", display_path(.path))]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: io::Error,
    },
    #[error("{}: parse error {message}", display_path(.path))]
    Parse { path: Option<PathBuf>, message: String },
    #[error("{}: invalid scenario: {message}", display_path(.path))]
    Invalid { path: Option<PathBuf>, message: String },
    /// A numerical precondition failed while running a command.
    #[error(transparent)]
    Core(#[from] leadcons_core::Error),
    #[error(transparent)]
    Report(#[from] crate::report::ReportError),
}

fn display_path(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "<input>".into())
}

impl AppError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        AppError::Io { path: Some(path.to_path_buf()), source }
    }

    pub fn with_path(self, p: &Path) -> Self {
        let p = Some(p.to_path_buf());
        match self {
            AppError::Io { source, .. } => AppError::Io { path: p, source },
            AppError::Parse { message, .. } => AppError::Parse { path: p, message },
            AppError::Invalid { message, .. } => AppError::Invalid { path: p, message },
            other => other,
        }
    }

    /// 2 for unreadable or malformed input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Io { .. } | AppError::Parse { .. } | AppError::Invalid { .. } => 2,
            AppError::Report(crate::report::ReportError::Io(_)) => 2,
            AppError::Core(_) | AppError::Report(_) => 1,
        }
    }
}
