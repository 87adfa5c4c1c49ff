//! Command-line runner for the pgica toolkit: dataset generation, fitting,
//! benchmark sweeps, theory diagnostics and metric scoring, with every output
//! file carrying the config that reproduces it.

pub mod cli;
pub mod commands;
pub mod config;
pub mod formats;
pub mod methods;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;

use cli::{Cli, Command};
use config::ConfigFile;

/// Relative output paths are resolved against this directory when set.
pub const OUTPUT_DIR_ENV: &str = "PGICA_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing arguments; exit code 2.
    Usage(String),
    /// Anything that went wrong while running; exit code 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<pgica_core::Error> for CliError {
    fn from(e: pgica_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

/// Whether a command's checks passed; `false` maps to exit code 1.
pub type Outcome = Result<bool, CliError>;

pub fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = ConfigFile::load_opt(cli.config.as_deref()).map_err(CliError::Usage).and_then(|cfg| match cli.command {
        Command::Generate(a) => commands::generate::run(&cfg, a),
        Command::Fit(a) => commands::fit::run(&cfg, a),
        Command::Bench(a) => commands::bench::run(&cfg, a),
        Command::Theory(a) => commands::theory::run(&cfg, a),
        Command::Metrics(a) => commands::metrics::run(&cfg, a),
    });
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILURE,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}
