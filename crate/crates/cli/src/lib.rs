//! Library surface of the batch experiment runner; the binary in `main.rs`
//! is a thin wrapper so the acceptance suite can drive runs in-process.

pub mod config;
pub mod experiments;
pub mod output;

use std::fmt;

/// Error categories mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Configuration problems (exit code 2).
    Config(String),
    /// Runtime failures: I/O, numerical guards (exit code 3).
    Runtime(String),
    /// An experiment's internal consistency check failed (exit code 4).
    SelfCheck(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::SelfCheck(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
            CliError::SelfCheck(m) => write!(f, "self-check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
