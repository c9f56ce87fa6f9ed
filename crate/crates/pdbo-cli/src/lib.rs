//! Harness for running, comparing and checking the solvers in `pdbo-core`.
//!
//! `run` writes `trajectory.csv` and `summary.json` into `--out` (or `--out/seed-<s>/` for
//! several seeds). `compare` writes one directory per method plus `compare.csv` and
//! `summary.md`. `check` prints a table of numerical self-checks.

pub mod commands;
pub mod error;
pub mod output;
pub mod resolve;
pub mod settings;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, EXIT_CONFIG, EXIT_OK};
use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "pdbo", version, about = "Primal-dual bilevel optimization runs and comparisons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one method (optionally over several seeds).
    Run(ManifestArgs),
    /// Run several methods under a shared gradient-call budget.
    Compare(ManifestArgs),
    /// Finite-difference, schedule and inner-solver checks for a problem.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    /// JSON manifest; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub problem: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let io = |e| CliError::Io { path: "<stdout>".into(), source: e };
    match cli.command {
        Command::Run(a) => {
            let s = a.settings.resolve(a.config.as_deref())?;
            for r in commands::cmd_run(&s)? {
                writeln!(stdout, "{} seed {}: f = {:.6e}, {} gradient calls", r.method, r.seed, r.f_final, r.gradient_calls)
                    .map_err(io)?;
            }
        }
        Command::Compare(a) => {
            let s = a.settings.resolve(a.config.as_deref())?;
            let summaries = commands::cmd_compare(&s)?;
            write!(stdout, "{}", output::summary_table(&summaries)).map_err(io)?;
        }
        Command::Check(a) => {
            let s = Settings { seed: a.seed, train: a.train, val: a.val, ..Settings::default() };
            commands::cmd_check(&a.problem, &s, stdout)?;
        }
    }
    Ok(())
}

/// Parse `args` (including the program name) and run; returns the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
