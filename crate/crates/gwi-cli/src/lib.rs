//! Library surface of the gwi CLI: config schema, result tables, the
//! deterministic parallel scheduler, and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod parallel;
pub mod table;

/// Exit codes: 0 success, 2 config/usage error, 3 runtime budget or
/// precondition error.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { code: 2, msg: msg.into() }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError { code: 3, msg: msg.into() }
    }
}
