//! `rdch` command line: finite element runs of the relaxed degenerate
//! Cahn-Hilliard system, stability scans and refinement studies.
//!
//! Exit codes: 0 ok, 1 config error, 2 solver error, 3 IO error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rdch::commands::{self, CommandError};
use rdch::config::{parse_config, RunConfig};

#[derive(Parser)]
#[command(
    name = "rdch",
    about = "Relaxed degenerate Cahn-Hilliard finite element solver",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured model to t_end; writes series.csv and snapshots.
    Run { config: PathBuf },
    /// Spectral radius of the amplification matrix over a dt grid, per sigma.
    ScanStability { config: PathBuf },
    /// Refinement study on nested meshes with a smooth deterministic profile.
    ConvergenceStudy { config: PathBuf },
    /// Print mesh quality metrics; exits nonzero if the mesh is not acute.
    ValidateMesh {
        config: PathBuf,
        /// Also write mesh_nodes.csv and mesh_elements.csv to the output dir.
        #[arg(long)]
        dump_mesh: bool,
    },
}

fn load(path: &PathBuf) -> Result<RunConfig, CommandError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_config(&text)?)
}

fn dispatch(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Run { config } => commands::cmd_run(&load(&config)?),
        Command::ScanStability { config } => commands::cmd_scan_stability(&load(&config)?),
        Command::ConvergenceStudy { config } => commands::cmd_convergence_study(&load(&config)?),
        Command::ValidateMesh { config, dump_mesh } => {
            commands::cmd_validate_mesh(&load(&config)?, dump_mesh)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
