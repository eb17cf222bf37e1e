//! Command-line harness: dataset generation, classifier training, policy
//! evaluation, scenario simulation, and independent replay verification.
//!
//! Exit codes: 0 success, 1 validation failure (bad arguments or files,
//! failed verification), 2 internal error.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "veer", version, about = "Multi-vehicle collision avoidance harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled conflict-resolution dataset from MILP solutions.
    GenerateData {
        /// Number of labeled instances to produce.
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Minimum inf-norm separation, meters.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Tube radius, meters.
        #[arg(long, default_value_t = 0.055)]
        rho: f64,
        /// Look-ahead horizon in steps (duration = horizon * dt).
        #[arg(long, default_value_t = 40)]
        horizon: usize,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        /// Half-width of the start/goal sampling cubes, meters.
        #[arg(long, default_value_t = 0.25)]
        cube_half_width: f64,
        /// Per-instance MILP time limit, seconds.
        #[arg(long, default_value_t = 120.0)]
        time_limit: f64,
        /// Output dataset path (line-delimited JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the conflict-resolution sequence classifier on a dataset.
    TrainCr {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 256)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate conflict-resolution policies over a random pool of
    /// conflicting pairs and emit the separation-rate table.
    Evaluate {
        /// Comma-separated policies: random,greedy,learned,repair,oracle.
        #[arg(long, default_value = "random,greedy")]
        policies: String,
        /// Comma-separated tube-to-separation ratios.
        #[arg(long, default_value = "0.5,0.95,1.15")]
        ratios: String,
        /// Pool size.
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 40)]
        horizon: usize,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        /// Trained classifier (required for learned/repair).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Oracle MILP time limit, seconds.
        #[arg(long, default_value_t = 120.0)]
        oracle_time_limit: f64,
        /// Summary CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-instance outcome log.
        #[arg(long)]
        outcomes: Option<PathBuf>,
    },
    /// Run a scenario in receding horizon and emit the run log and the
    /// per-vehicle trajectory CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Conflict-resolution policy: random, greedy, or learned.
        #[arg(long, default_value = "greedy")]
        policy: String,
        /// Enable the naive repair loop on failures.
        #[arg(long, default_value_t = true)]
        repair: bool,
        /// Trained classifier (required for the learned policy).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Number of receding-horizon steps (default: the full horizon).
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the scenario's tube radius.
        #[arg(long)]
        rho: Option<f64>,
        /// Output directory for run.log and trajectories.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Independently verify the separations of a stored run.
    Replay {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
    /// Write a built-in scenario to a JSON file.
    GenScenario {
        /// One of: swap, cube, pair.
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 20)]
        n_uas: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.055)]
        rho: f64,
        #[arg(long, default_value_t = 40)]
        horizon: usize,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // usage problems exit 1 regardless of clap's default codes
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::GenerateData { n, seed, delta, rho, horizon, dt, cube_half_width, time_limit, out } => {
            commands::generate_data(n, seed, delta, rho, horizon, dt, cube_half_width, time_limit, &out)
        }
        Command::TrainCr { data, out, epochs, batch, lr, hidden, seed } => {
            commands::train_cr(&data, &out, epochs, batch, lr, hidden, seed)
        }
        Command::Evaluate {
            policies,
            ratios,
            n,
            seed,
            delta,
            horizon,
            dt,
            model,
            oracle_time_limit,
            out,
            outcomes,
        } => commands::evaluate(
            &policies,
            &ratios,
            n,
            seed,
            delta,
            horizon,
            dt,
            model.as_deref(),
            oracle_time_limit,
            &out,
            outcomes.as_deref(),
        ),
        Command::Simulate { scenario, policy, repair, model, steps, seed, rho, out } => {
            commands::simulate(&scenario, &policy, repair, model.as_deref(), steps, seed, rho, &out)
        }
        Command::Replay { scenario, trajectories, log } => {
            commands::replay(&scenario, &trajectories, &log)
        }
        Command::GenScenario { kind, n_uas, seed, delta, rho, horizon, dt, out } => {
            commands::gen_scenario(&kind, n_uas, seed, delta, rho, horizon, dt, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
