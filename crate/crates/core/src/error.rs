use std::path::PathBuf;

/// Errors produced anywhere in the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or configuration value violates its documented bound.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical function was called outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matching, profile or observation is internally inconsistent.
    #[error("structural error: {0}")]
    Structural(String),

    /// An exhaustive enumeration was requested on an instance that is too large.
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
