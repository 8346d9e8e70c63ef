use std::path::PathBuf;

/// Anything that can stop a CLI command.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("cannot read {}: {source}", path.display())]
    Input { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Runtime(String),
}

impl Error {
    /// 1 for anything wrong with the user's inputs, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Parse { .. } | Self::Input { .. } => 1,
            Self::Output { .. } | Self::Runtime(_) => 2,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub(crate) fn runtime(msg: impl std::fmt::Display) -> Self {
        Self::Runtime(msg.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
