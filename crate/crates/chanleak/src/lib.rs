//! File formats, configuration and the command-line front end for
//! [`chanleak_core`].

pub mod cli;
pub mod config;
pub mod input;
pub mod report;

pub use cli::run;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FINDINGS: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NO_INPUT: i32 = 3;
    pub const STRICT_PARSE: i32 = 4;
}

/// An error that ends the command with a specific exit code.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: exit::USAGE, message: message.into() }
    }

    pub fn no_input(message: impl Into<String>) -> Self {
        Self { code: exit::NO_INPUT, message: message.into() }
    }

    pub fn strict(message: impl Into<String>) -> Self {
        Self { code: exit::STRICT_PARSE, message: message.into() }
    }
}
