//! `recomb` — batch front end for recombination-dynamics models.
//!
//! Reads one JSON model config, runs one analysis subcommand, writes the
//! artifacts (JSON reports, CSV series) into the output directory and
//! prints a single machine-readable JSON summary to stdout. Exit status
//! is 0 on success (degenerate models are flagged, not failed) and
//! nonzero on validation errors or violated identities.

mod commands;
mod config;
mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num::BigRational;

use config::{build_model, Mode, Model, ModelConfig};
use recomb_core::scalar::Scalar;

#[derive(Parser)]
#[command(name = "recomb", version, about = "recombination dynamics on partitions")]
struct Cli {
    /// Path to the JSON model config.
    #[arg(long, global = true, default_value = "model.json")]
    config: PathBuf,

    /// Directory for report files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Number mode override (default: the config's mode, else exact).
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,

    /// Cap on the number of partitions in closures and state spaces.
    #[arg(long, global = true)]
    state_cap: Option<usize>,

    /// Cap on the number of entries in dense joint tables.
    #[arg(long, global = true)]
    table_cap: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the closure of the weighted partitions and their common
    /// refinement.
    Closure,
    /// Emit the transition matrix over the reachable states as CSV.
    Matrix,
    /// Emit the distribution and survival series, with the chain-mixture
    /// cross-check when a measure is configured.
    Evolve {
        #[arg(long, default_value_t = 32)]
        steps: usize,
    },
    /// Emit the full quasi-stationary report.
    Qsd,
    /// Emit the conditioned-process matrix and finite-horizon path checks.
    Qprocess {
        /// Horizon for the conditioned-path comparison.
        #[arg(long, default_value_t = 300)]
        horizon: usize,
    },
    /// Sample seeded trajectories and emit the empirical survival curve.
    Simulate {
        #[arg(long, default_value_t = 10_000)]
        seeds: u64,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the whole invariant suite on the model.
    Verify {
        /// Base seed for the Monte Carlo consistency check.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            std::process::exit(outcome.exit_code);
        }
        Err(error) => {
            eprintln!("{}", serde_json::json!({ "error": error.to_string() }));
            std::process::exit(2);
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<commands::Outcome> {
    let config = ModelConfig::load(&cli.config)?;
    let mode = cli.mode.or(config.mode).unwrap_or(Mode::Exact);
    match mode {
        Mode::Exact => dispatch::<BigRational>(cli, &config),
        Mode::Float => dispatch::<f64>(cli, &config),
    }
}

fn dispatch<N: Scalar>(cli: &Cli, config: &ModelConfig) -> anyhow::Result<commands::Outcome> {
    let model: Model<N> = build_model(config, cli.state_cap, cli.table_cap)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Closure => commands::closure(&model, out),
        Command::Matrix => commands::matrix(&model, out),
        Command::Evolve { steps } => commands::evolve(&model, *steps, out),
        Command::Qsd => commands::qsd(&model, out),
        Command::Qprocess { horizon } => commands::qprocess(&model, *horizon, out),
        Command::Simulate { seeds, horizon, seed } => {
            commands::simulate(&model, *seeds, *horizon, *seed, out)
        }
        Command::Verify { seed } => commands::verify(&model, *seed, out),
    }
}
