//! Command line front end and HTTP scoring service for the headline
//! incongruity toolkit.
//!
//! [`run`] is the whole CLI; the `incongruity` binary only forwards
//! `std::env::args` and the process streams to it.

pub mod args;
mod commands;
pub mod manifest;
mod overlay;
pub mod predict;
pub mod service;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;

pub use args::{Cli, Command};
pub use manifest::{FileDigest, RunManifest};
pub use predict::{LoadedModel, Prediction, Scorer, DISPLAY_THRESHOLD};

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status when a command fails at run time.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for invalid invocations.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] incongruity_core::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(incongruity_core::Error::Config(_)) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parses `argv` (program name first), runs the command and returns the
/// exit status. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match overlay::parse_with_config(&argv) {
        Ok(cli) => cli,
        Err(overlay::ParseError::Clap(e)) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
        Err(overlay::ParseError::Config(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    match commands::dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Runs against the process arguments and standard streams.
pub fn main_with_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    let _ = std::io::stdout().flush();
    code
}
