//! `kinetic-mc`: batch experiment runner for the kinetic Monte Carlo
//! toolkit. One experiment per invocation; artifacts are CSV files plus a
//! JSON manifest, deterministic for a given configuration regardless of the
//! worker count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kinetic_mc::config::{load_config, EXPERIMENTS};
use kinetic_mc::experiments::{run_experiment, write_outcome};
use kinetic_mc::CliError;

#[derive(Parser)]
#[command(name = "kinetic-mc", version, about = "Particle Monte Carlo experiments for kinetic equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        /// Path to the key = value configuration file.
        config: PathBuf,
        /// Worker threads for the data-parallel loops; results do not
        /// depend on this value.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config file without running it.
    Validate {
        config: PathBuf,
    },
    /// List the canned experiments.
    ListExperiments,
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("KINETIC_MC_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("KINETIC_MC_SEED is not an integer: {v}"))),
        Err(_) => Ok(None),
    }
}

fn execute() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for name in EXPERIMENTS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config, env_seed()?)?;
            println!("ok: experiment `{}` (seed {}, {} particles)", cfg.experiment, cfg.seed, cfg.n_particles);
            Ok(())
        }
        Command::Run { config, workers, out } => {
            #[cfg(feature = "parallel")]
            if workers > 0 {
                // The pool size affects speed only; all streams are keyed.
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build_global()
                    .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
            }
            let cfg = load_config(&config, env_seed()?)?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
            let outcome = run_experiment(&cfg, &out_dir)?;
            let manifest = write_outcome(&outcome, &out_dir, Some(workers))?;
            println!("wrote {}", manifest.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
