//! CLI failures and their exit statuses.

use std::fmt;
use std::path::Path;

/// Exit statuses. Usage errors (including unknown subcommands) exit with 2 via clap.
pub mod exit {
    pub const CONFIG: i32 = 3;
    pub const MISSING_INPUT: i32 = 4;
    pub const BAD_INPUT: i32 = 5;
    pub const COMPUTATION: i32 = 6;
    pub const OUTPUT: i32 = 7;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: exit::CONFIG, message: format!("config: {}", message.into()) }
    }

    pub fn missing(path: &Path, e: std::io::Error) -> Self {
        Self { code: exit::MISSING_INPUT, message: format!("cannot read {}: {e}", path.display()) }
    }

    pub fn bad_input(path: &Path, e: impl fmt::Display) -> Self {
        Self { code: exit::BAD_INPUT, message: format!("{}: {e}", path.display()) }
    }

    pub fn computation(e: impl fmt::Display) -> Self {
        Self { code: exit::COMPUTATION, message: e.to_string() }
    }

    pub fn output(path: &Path, e: impl fmt::Display) -> Self {
        Self { code: exit::OUTPUT, message: format!("cannot write {}: {e}", path.display()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
