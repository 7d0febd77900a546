//! Command-line driver for the power and element sweeps.
//!
//! Exit codes: 0 on success, 2 on a config error, 3 on an I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use irs_robust::harness::{run_experiment_with_threads, summarize, write_results, Experiment, ExperimentConfig};
use irs_robust::Error;

#[derive(Parser)]
#[command(name = "irs-sim", version, about = "Robust IRS-assisted MISO design: Monte Carlo sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Power,
    Elements,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write per-trial results as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        experiment: ExperimentArg,
        /// Output CSV; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_io() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Validate { config } => {
            ExperimentConfig::load(&config)?;
            println!("{}: ok", config.display());
            Ok(())
        }
        Command::Run { config, experiment, out, seed, trials, threads } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if threads == Some(0) {
                return Err(Error::Config("--threads must be >= 1".into()));
            }
            cfg.validate()?;
            let out = out
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| Error::Config("no output path: pass --out or set `output`".into()))?;
            let experiment = match experiment {
                ExperimentArg::Power => Experiment::Power,
                ExperimentArg::Elements => Experiment::Elements,
            };
            let records = run_experiment_with_threads(&cfg, experiment, threads);
            write_results(&records, &out)?;

            println!("{:<12} {:>12} {:>8} {:>12} {:>12} {:>6}", "scheme", "axis", "sigma2", "mean_mse", "std_err", "failed");
            for s in summarize(&records) {
                println!(
                    "{:<12} {:>12} {:>8} {:>12.6e} {:>12.3e} {:>6}",
                    s.scheme.to_string(),
                    s.axis_value,
                    s.sigma2,
                    s.mean,
                    s.std_error,
                    s.failed
                );
            }
            let unconverged = records.iter().filter(|r| !r.converged).count();
            eprintln!("{} records written to {} ({} not converged)", records.len(), out.display(), unconverged);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
