//! `escape`: batch experiments for risk-sensitive escape-time control.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "escape", version, about = "Risk-sensitive escape-time control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Model and domain config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Convergence tolerance of value iteration (relative change of W).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Comma-separated lattice scales.
    #[arg(long = "n", global = true, value_delimiter = ',')]
    pub n: Vec<u32>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Overrides the risk parameter of the config.
    #[arg(long = "c", global = true)]
    pub c: Option<f64>,
    /// Starting point (comma-separated coordinates); defaults to the origin.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    /// Sweep limit of value iteration.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub max_iters: usize,
    /// Put a generation timestamp above each CSV header.
    #[arg(long, global = true)]
    pub stamp: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the model invariants and print a summary.
    Validate,
    /// Reflect random paths and verify the Skorokhod problem conditions.
    SpCheck,
    /// Isaacs gap and plug-back identity of the Hamiltonian at random gradients.
    HamCheck,
    /// Competing-queues closed form and subsolution scan.
    ClosedForm,
    /// Solve the dynamic programming equation at each `--n`.
    SolveDpe,
    /// Monte Carlo estimates of the risk-sensitive cost per policy.
    Simulate,
    /// Error of V^n against the closed-form value over `--n`.
    Converge,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(workers) = cli.common.workers {
        if workers == 0 {
            return Err(CliError::invalid("workers", "must be at least 1"));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    let c = &cli.common;
    match cli.command {
        Command::Validate => commands::validate(c),
        Command::SpCheck => commands::sp_check(c),
        Command::HamCheck => commands::ham_check(c),
        Command::ClosedForm => commands::closed_form(c),
        Command::SolveDpe => commands::solve_dpe(c),
        Command::Simulate => commands::simulate(c),
        Command::Converge => commands::converge(c),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
