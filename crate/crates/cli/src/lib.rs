//! Command-line front end and read-only HTTP API for capgrowth snapshots.
//!
//! Every failure ends the process with one stderr line of the form
//! `<class>: <kind>: <message>` and an exit code chosen by class:
//! 2 for usage errors, 3 for data errors, 4 for internal errors.

pub mod api;
pub mod commands;
pub mod error;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use commands::{Cli, Command};
pub use error::{CliError, ErrorClass};

/// Parse `argv` (program name first), run the command and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            let err = CliError::usage("InvalidArguments", first.trim_start_matches("error: "));
            eprintln!("{err}");
            return err.exit_code();
        }
    };
    match commands::execute(&cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{err}");
            err.exit_code()
        }
    }
}
