//! Command-line front-end for the random connection network laboratory.
//!
//! The binary is thin: [`parse_invocation`] turns a command line into a
//! [`CliInvocation`] without touching the filesystem, and [`execute`] merges
//! any config file under the flags, runs the chosen subcommand, and writes
//! CSV or JSONL with a metadata header. Exit codes: 0 success, 1 numerical
//! failure (the failing operation is named), 2 malformed flags or
//! configuration (the offending flag is named).

pub mod config;
pub mod invocation;
pub mod run;

pub use invocation::{
    parse_invocation, CliError, CliInvocation, OutputFormat, OutputSpec, SubcommandKind,
};
pub use run::execute;

use std::ffi::OsString;

/// Full entry point: parse, execute, and map errors to exit codes. Help and
/// version text goes to stdout; errors go to stderr.
pub fn run_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let inv = match parse_invocation(argv) {
        Ok(inv) => inv,
        Err(e) => {
            if e.code == 0 {
                println!("{e}");
            } else {
                eprintln!("{e}");
            }
            return e.code;
        }
    };
    match execute(&inv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.code
        }
    }
}
