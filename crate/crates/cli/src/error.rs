use std::fmt;

use gfperc_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_GATE: i32 = 4;

/// A failure with its exit code and the config field it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub path: String,
    pub message: String,
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn gate(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: EXIT_GATE,
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, e: impl fmt::Display) -> Self {
        Self {
            code: EXIT_IO,
            path: path.into(),
            message: e.to_string(),
        }
    }

    /// Maps a library error raised while handling the config section `path`.
    pub fn from_core(path: &str, e: Error) -> Self {
        match e {
            Error::Config { path: p, message } => {
                let full = if path.is_empty() {
                    p
                } else {
                    format!("{path}.{p}")
                };
                Self::config(full, message)
            }
            Error::Resource { .. } => Self {
                code: EXIT_RESOURCE,
                path: path.into(),
                message: e.to_string(),
            },
            Error::Io(m) => Self::io(path, m),
            other => Self::config(path, other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "at `{}`: {}", self.path, self.message)
        }
    }
}

/// Attaches a config path to library results.
pub trait Context<T> {
    fn at(self, path: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for gfperc_core::Result<T> {
    fn at(self, path: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(path, e))
    }
}
