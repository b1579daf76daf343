use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("config error: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] edtweetlab_core::Error),
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;

impl AppError {
    /// Process exit code: 2 missing file, 3 config, 4 training, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::MissingFile(_) => 2,
            AppError::Config(_) => 3,
            AppError::Training(_) => 4,
            AppError::Core(edtweetlab_core::Error::InvalidConfig(_)) => 3,
            _ => 1,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            AppError::MissingFile(path.to_path_buf())
        } else {
            AppError::Io { path: path.to_path_buf(), source }
        }
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        AppError::Format { path: path.to_path_buf(), msg: msg.into() }
    }

    pub fn training(e: impl std::fmt::Display) -> Self {
        AppError::Training(e.to_string())
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| AppError::io(path, e))
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| AppError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}
