use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] urtu_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// `2` for numerical failures, `1` for everything the user can fix in
    /// the inputs.
    pub fn exit_code(&self) -> i32 {
        use urtu_core::Error as E;
        match self {
            Error::Model(
                E::Numeric(_)
                | E::Stiffness { .. }
                | E::IntegratorAccuracy { .. }
                | E::NoPositiveEquilibrium { .. }
                | E::InsufficientHorizon(_),
            ) => 2,
            _ => 1,
        }
    }
}
