use std::path::PathBuf;
use std::process::ExitCode;

use adaptive_doa::config::load_config;
use adaptive_doa::report::{run_to_dir, Command};
use adaptive_doa::sim::ExperimentConfig;
use clap::{Parser, Subcommand};

/// Adaptive Tx/Rx channel selection for DOA estimation.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// One closed loop, written to trajectory.csv.
    Run,
    /// Mean MSE per SNR and bound, written to mse_vs_snr.csv.
    Sweep,
    /// Bound surface over (s, h) on the prior, written to bound_surface.csv.
    Bounds,
    /// Selection timeline of every configured bound, written to selections.csv.
    Policies,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let cmd = match cli.command {
        Cmd::Run => Command::Run,
        Cmd::Sweep => Command::Sweep,
        Cmd::Bounds => Command::Bounds,
        Cmd::Policies => Command::Policies,
    };
    let manifest = run_to_dir(cmd, &cfg, &cli.out)?;
    for a in &manifest.artifacts {
        println!("{}", a.display());
    }
    Ok(())
}
