//! `dqlm`: config-driven runner for spectra, steady states, dynamics,
//! flux scans, exact-state verification and exact profiles.
//!
//! Exit codes: 0 success, 2 bad flags or config, 3 empty sector, 4 numerical
//! failure or failed verification. Failures print one JSON object to stderr.

mod config;
mod fail;
mod output;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::{Settings, Task, OUTPUT_DIR_ENV};
use fail::{CliError, Exit};

#[derive(Debug, Parser)]
#[command(name = "dqlm", version, about = "Dissipative U(1) quantum link model toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the task named by the config file's `task` key.
    Run(Common),
    /// Liouvillian spectra under open and/or periodic boundaries.
    Spectrum(Common),
    /// Kernel of the Liouvillian, compared with the exact state.
    SteadyState(Common),
    /// Master-equation evolution of site densities from a product state.
    Dynamics(Common),
    /// Spectra along a boundary-flux scan.
    Winding(Common),
    /// Residuals of every exact steady state and eigenoperator.
    VerifyExact(Common),
    /// Exact profiles in fixed-charge sectors.
    Profile(Common),
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON config; flags override its keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (task, common) = match cli.command {
        Command::Run(c) => (None, c),
        Command::Spectrum(c) => (Some(Task::Spectrum), c),
        Command::SteadyState(c) => (Some(Task::SteadyState), c),
        Command::Dynamics(c) => (Some(Task::Dynamics), c),
        Command::Winding(c) => (Some(Task::Winding), c),
        Command::VerifyExact(c) => (Some(Task::VerifyExact), c),
        Command::Profile(c) => (Some(Task::Profile), c),
    };
    let mut base = match &common.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    if let Some(dir) = std::env::var(OUTPUT_DIR_ENV).ok().filter(|d| !d.is_empty()) {
        base.output_dir = Some(dir);
    }
    let merged = base.overlay(&common.settings)?;
    let task = task.or(merged.task).ok_or_else(|| CliError::new(Exit::Schema, "schema", "`run` needs a `task` key in the config"))?;
    tasks::run(&merged.resolve(task)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            let err = CliError::new(Exit::Schema, "usage", first);
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code() as u8)
        }
    }
}
