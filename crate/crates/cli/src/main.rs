//! `sympcool`: trap frequencies, cooling budgets, phase diagrams, thermal
//! contact, cooling trajectories and DSMC relaxation runs.
//!
//! Exit status is 0 on success, 2 for invalid arguments or configuration
//! and 1 for failures during a run.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail validation

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::Format;

#[derive(Debug, Parser)]
#[command(name = "sympcool", version, about = "Two-species sympathetic cooling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, or a file path whose stem names the outputs.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Seed for every random draw of the run.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// Encoding of tabular outputs.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trap frequencies and sag per species.
    Trap(Common),
    /// Temperature and density curves along the cooling budget.
    Budget(Common),
    /// Outcome regions over (eta, N2/N2c).
    PhaseDiagram(commands::phase::PhaseArgs),
    /// Collision, energy-exchange and thermalization rates of a two-gas state.
    Contact(commands::contact::ContactArgs),
    /// Cooling trajectory with evaporation and thermal contact.
    Traj(commands::traj::TrajArgs),
    /// Particle simulation of thermal relaxation.
    Dsmc(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Trap(c) => commands::trap::run(c),
        Command::Budget(c) => commands::budget::run(c),
        Command::PhaseDiagram(a) => commands::phase::run(a),
        Command::Contact(a) => commands::contact::run(a),
        Command::Traj(a) => commands::traj::run(a),
        Command::Dsmc(c) => commands::dsmc::run(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
