use std::path::PathBuf;

use sentinfo_core::Error as CoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: invalid UTF-8 on line {line}", path.display())]
    Encoding { path: PathBuf, line: usize },
    #[error("{}: {source}", path.display())]
    Data {
        path: PathBuf,
        #[source]
        source: CoreError,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    CorruptPayload(String),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn data(path: impl Into<PathBuf>, source: CoreError) -> Self {
        Error::Data { path: path.into(), source }
    }

    /// 1 usage, 2 data or validation, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Core(e) | Error::Data { source: e, .. } if e.is_numerical() => 3,
            Error::Core(CoreError::InvalidConfig(_)) => 1,
            _ => 2,
        }
    }
}
