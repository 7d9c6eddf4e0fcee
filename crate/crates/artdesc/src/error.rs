use std::io;
use std::path::{Path, PathBuf};

/// Errors surfaced by the file formats, pipeline and CLI.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("missing {stage} artifact {path}; {hint}")]
    Missing {
        stage: &'static str,
        path: PathBuf,
        hint: String,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] artdesc_core::Error),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn data(msg: impl Into<String>) -> Self {
        AppError::Data(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        AppError::Usage(msg.into())
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        AppError::Format {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 missing artifact.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Missing { .. } => 3,
            AppError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 3,
            _ => 2,
        }
    }
}

/// Fails with [`AppError::Missing`] unless `path` exists.
pub fn require(path: &Path, stage: &'static str, hint: &str) -> AppResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(AppError::Missing {
            stage,
            path: path.to_path_buf(),
            hint: hint.to_string(),
        })
    }
}
