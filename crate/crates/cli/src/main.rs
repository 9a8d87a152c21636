//! `mshlab`: run m-subharmonic grid experiments from JSON configurations.
//!
//! Exit status: 0 on success, 1 on a failed verification or a runtime
//! error, 2 on usage and schema errors.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Globals, Suite, Usage};

#[derive(Parser, Debug)]
#[command(name = "mshlab", version, about = "Grid experiments for m-subharmonic functions")]
struct Cli {
    /// JSON experiment configuration
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Override the configured resolution (nodes per axis)
    #[arg(long, global = true, value_name = "INT")]
    resolution: Option<usize>,
    /// Seed for the random corpus
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the order-k density as density.mshg plus summary.json
    Hessian,
    /// Classify functions in the m-sh filtration
    CheckMsh,
    /// Solve for the relative extremal function of the configured set
    Pmeasure,
    /// Condenser capacity at each configured resolution, appended as CSV rows
    Capacity,
    /// Run a checker suite; exits 0 iff every check passed
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let g = Globals { config: cli.config, out: cli.out, resolution: cli.resolution, seed: cli.seed };
    let run = commands::out_dir(&g.out).and_then(|()| match cli.command {
        Command::Hessian => commands::hessian(&g).map(|()| true),
        Command::CheckMsh => commands::check_msh(&g).map(|()| true),
        Command::Pmeasure => commands::pmeasure(&g).map(|()| true),
        Command::Capacity => commands::capacity(&g).map(|()| true),
        Command::Verify { suite } => commands::verify(&g, suite),
    });
    match run {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<Usage>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
