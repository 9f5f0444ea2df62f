//! `anisoflow` command line: run simulations, parameter studies, iso/aniso
//! comparisons, model admissibility checks and VTK exports.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 validation failure,
//! 3 inadmissible model.

mod commands;
mod study;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "anisoflow", version, about = "Level-set solver for anisotropic interface energy flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a config file and write its time series.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the snapshot cadence from the config.
        #[arg(long)]
        snapshot_every: Option<usize>,
        /// Run even if the anisotropic tensor is not positive definite.
        #[arg(long)]
        force_inadmissible: bool,
    },
    /// Run a parameter sweep (mesh size, time step or ellipse ratio).
    Study {
        #[arg(long)]
        config: PathBuf,
        /// Maximum number of member runs executing concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the iso and aniso variants from the same initial state and emit
    /// the aligned efficiency table.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        snapshot_every: Option<usize>,
        #[arg(long)]
        force_inadmissible: bool,
    },
    /// Report the positive-definiteness of a named energy model.
    CheckModel {
        name: String,
        params: Vec<f64>,
        /// CSV table for the `tabulated` model.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Write the initial fields of a configured case as a VTK snapshot.
    ExportVtk {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            snapshot_every,
            force_inadmissible,
        } => commands::cmd_run(&config, snapshot_every, force_inadmissible),
        Command::Study { config, jobs } => commands::cmd_study(&config, jobs),
        Command::Compare {
            config,
            snapshot_every,
            force_inadmissible,
        } => commands::cmd_compare(&config, snapshot_every, force_inadmissible),
        Command::CheckModel { name, params, table } => {
            commands::cmd_check_model(&name, &params, table.as_deref())
        }
        Command::ExportVtk { config, out } => commands::cmd_export_vtk(&config, &out),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
