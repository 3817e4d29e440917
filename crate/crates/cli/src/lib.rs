//! The `xnt` command line: argument parsing, config overlay, dispatch and
//! report output.

pub mod args;
pub mod config;
pub mod report;
pub mod run;

use std::ffi::OsString;
use std::fmt;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};
use xnt_core::XntError;

pub use args::Cli;
pub use report::{Report, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, polynomial text, or out-of-range problems.
    Input(String),
    /// A checked invariant or assertion failed.
    Invariant(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Input(_) | CliError::Io(_) => EXIT_INPUT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "error: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<XntError> for CliError {
    fn from(e: XntError) -> Self {
        match e {
            XntError::Invariant(m) => CliError::Invariant(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Parses `argv` (program name first) after splicing in `--config`.
pub fn parse_args(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let argv = config::overlay(argv).map_err(|e| {
        Cli::command().error(
            ErrorKind::InvalidValue,
            e.to_string().trim_start_matches("error: ").to_string(),
        )
    })?;
    let cmd = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true));
    let matches = cmd.try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

/// Runs the command line and returns the process exit code.
pub fn run_cli(argv: Vec<OsString>) -> i32 {
    let cli = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("--threads: {e}")))?;
    }
    let out = run::execute(cli)?;
    report::write_json(&out.report, cli.common.out.as_deref())?;
    if let Some(dir) = &cli.common.csv {
        report::write_tables(dir, &out.report.command, &out.tables)?;
    }
    eprintln!("{}: {}", out.report.command, out.summary);
    for s in &out.report.semi_decisions {
        eprintln!("  semi-decision: {s}");
    }
    match out.failure {
        Some(msg) => {
            eprintln!("assertion failed: {msg}");
            Ok(EXIT_INVARIANT)
        }
        None => Ok(EXIT_OK),
    }
}
