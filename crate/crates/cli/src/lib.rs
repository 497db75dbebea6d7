//! IO, file formats, and command implementations for the `fairrep` binary.
//!
//! The algorithmic work lives in `fairrep-core`; this crate adds CSV
//! ingestion with the built-in preprocessing recipes, the binary dataset
//! cache, JSON checkpoints, CSV/JSON reports, and the command-line surface
//! (`train`, `sweep`, `downstream`, `verify`, `synth`, `report`).

pub mod args;
pub mod cache;
pub mod checkpoint;
pub mod commands;
pub mod report;
pub mod runcfg;
pub mod table;

use std::fmt;

/// Process-level error carrying the intended exit code: 2 for user errors
/// (paths, flags, config), 1 for verification failures.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn user(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            exit_code: 2,
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            exit_code: 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::user(format!("io: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
