//! Command-line driver: TOML config in, a run directory of CSV/JSON out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::{Experiment, RunConfig};
use crate::error::CliResult;
use crate::output::RunDir;

#[derive(Debug, Parser)]
#[command(name = "qdc", version, about = "Quantum data center network simulator")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parent directory for the run directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the main iteration or repetition count.
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scatterer-scatterer Monte Carlo, rate fit and parameter grids.
    ProtocolMc,
    /// Compile, schedule and time one circuit.
    SingleJob {
        /// Circuit file; overrides `single_job.circuit`.
        #[arg(long)]
        circuit: Option<PathBuf>,
    },
    /// Multi-job sweep over request frequencies.
    Sweep,
    /// Compiled against random placement for every circuit in a directory.
    CompileBench {
        /// Circuit directory; overrides `compile_bench.circuit_dir`.
        #[arg(long)]
        circuits: Option<PathBuf>,
    },
}

impl Command {
    pub fn experiment(&self) -> Experiment {
        match self {
            Command::ProtocolMc => Experiment::ProtocolMc,
            Command::SingleJob { .. } => Experiment::SingleJob,
            Command::Sweep => Experiment::MultiJobSweep,
            Command::CompileBench { .. } => Experiment::CompileBench,
        }
    }
}

/// Runs one command and returns the run directory.
pub fn run(cli: Cli) -> CliResult<PathBuf> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let experiment = cli.command.experiment();
    cfg.check_experiment(experiment)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    let seed = cfg.seed()?;
    let base = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let hash = cfg.hash()?;
    let config_text = cfg.to_toml()?;
    let mut out = RunDir::create(&base, seed)?;
    out.write("config.toml", |w| {
        use std::io::Write;
        w.write_all(config_text.as_bytes())
            .map_err(|e| error::CliError::io("config.toml", e))
    })?;
    let mut ctx = Ctx {
        cfg: &cfg,
        seed,
        out: &mut out,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::ProtocolMc => commands::protocol_mc(&mut ctx, cli.iterations),
        Command::SingleJob { circuit } => commands::single_job(&mut ctx, circuit, cli.iterations),
        Command::Sweep => commands::sweep(&mut ctx, cli.iterations),
        Command::CompileBench { circuits } => commands::compile_bench(&mut ctx, circuits, cli.iterations),
    };
    if let Err(e) = result {
        let _ = std::fs::remove_dir_all(out.path());
        return Err(e);
    }
    out.finish(experiment.as_str(), seed, hash)
}
