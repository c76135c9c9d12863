//! Exit-code classification for command failures.

use std::fmt;

use scarbench::Error as CoreError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MANIFEST: i32 = 3;
pub const EXIT_ALL_FAILED: i32 = 4;

/// A command failure carrying the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_USAGE,
            error: error.into(),
        }
    }

    pub fn manifest(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_MANIFEST,
            error: error.into(),
        }
    }

    pub fn internal(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            error: error.into(),
        }
    }

    pub fn all_failed(total: usize) -> Self {
        Self {
            code: EXIT_ALL_FAILED,
            error: anyhow::anyhow!("all {total} cases failed"),
        }
    }

    /// Errors raised while loading a manifest.
    pub fn from_manifest(error: CoreError) -> Self {
        match error {
            CoreError::FileMissing(_) | CoreError::Io { .. } => Self::usage(error),
            other => Self::manifest(other),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CmdResult<T> = Result<T, Failure>;

/// Attaches an exit code to fallible calls.
pub trait OrExit<T> {
    fn or_usage(self) -> CmdResult<T>;
    fn or_internal(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_usage(self) -> CmdResult<T> {
        self.map_err(Failure::usage)
    }

    fn or_internal(self) -> CmdResult<T> {
        self.map_err(Failure::internal)
    }
}
