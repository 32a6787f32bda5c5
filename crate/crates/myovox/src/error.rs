use std::path::{Path, PathBuf};

use myovox_core::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] myovox_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// A file that exists but cannot be understood.
    #[error("{}: {source}", path.display())]
    InFile { path: PathBuf, source: myovox_core::Error },
    #[error("{}: {message}", path.display())]
    Json { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn json(path: &Path, e: serde_json::Error) -> Self {
        Error::Json { path: path.to_path_buf(), message: e.to_string() }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Core(e) | Error::InFile { source: e, .. } => e.kind(),
            Error::Io { .. } | Error::Json { .. } | Error::Config(_) => ErrorKind::Input,
        }
    }

    /// Process exit code: 2 input, 3 solver, 4 structural, 1 internal.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Input => 2,
            ErrorKind::Solver => 3,
            ErrorKind::Structural => 4,
            ErrorKind::Internal => 1,
        }
    }
}

pub(crate) trait WithPath<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> WithPath<T> for std::result::Result<T, myovox_core::Error> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| Error::InFile { path: path.to_path_buf(), source })
    }
}

impl<T> WithPath<T> for std::result::Result<T, std::io::Error> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
