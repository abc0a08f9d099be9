use std::path::PathBuf;

use thiserror::Error;

use crate::stepper::InvariantReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Invariant(Box<InvariantReport>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// A configuration problem, addressed by line and/or dotted key (`zone1.d_P`).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", self.render())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn syntax(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            key: None,
            message: message.into(),
        }
    }

    pub fn at_key(line: Option<usize>, key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            key: Some(key.into()),
            message: message.into(),
        }
    }

    fn render(&self) -> String {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => format!("line {l}: `{k}`: {}", self.message),
            (Some(l), None) => format!("line {l}: {}", self.message),
            (None, Some(k)) => format!("`{k}`: {}", self.message),
            (None, None) => self.message.clone(),
        }
    }
}
