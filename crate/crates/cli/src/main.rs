use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;
mod output;

#[derive(Debug, Parser)]
#[command(name = "osc-engine", version, about = "Two-oscillator measurement engine simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energy series, Fock snapshots and real-space densities.
    Simulate(RunArgs),
    /// Monte Carlo batch of engine cycles.
    Cycles(CycleArgs),
    /// Dump interaction matrix elements next to the 2D oracle.
    Elements(ElementArgs),
    /// The file set consumed by the figure renderer.
    FigureData(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON configuration document; omitted keys take canonical defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Always rebuild the interaction matrix and do not write the cache.
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Args)]
pub struct CycleArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Measurement time; defaults to the grid point minimizing p00.
    #[arg(long)]
    pub tau_measure: Option<f64>,
    #[arg(long)]
    pub cycles: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ElementArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Highest level u, v, j, k to dump.
    #[arg(long, default_value_t = 3)]
    pub max_level: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => commands::simulate(args, false),
        Command::FigureData(args) => commands::simulate(args, true),
        Command::Cycles(args) => commands::cycles(args),
        Command::Elements(args) => commands::elements(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
