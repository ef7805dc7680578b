//! `womctl`: validate, inspect and solve decentralized control problems with
//! word-of-mouth information sharing.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use report::Failure;

#[derive(Debug, Parser)]
#[command(name = "womctl", version, about = "Exact solvers for decentralized control with word-of-mouth communication")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write a JSON report to this path.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Cap on search sizes (overrides WOMCTL_CAP and the built-in defaults).
    #[arg(long, global = true)]
    pub cap: Option<u64>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an instance and report its dimensions.
    Validate { instance: String },
    /// Print the minimal communication delays and information paths.
    Delays { instance: String },
    /// Print memory, accessible, inaccessible and equivalent-state tables.
    Schema {
        instance: String,
        /// Only this time step.
        #[arg(long)]
        time: Option<usize>,
    },
    /// Count candidate strategies for exhaustive search and for every agent.
    Counts { instance: String },
    /// Compute an optimal strategy.
    Solve {
        instance: String,
        #[arg(long, value_enum, default_value_t = MethodArg::CommonInfo)]
        method: MethodArg,
        /// Agent (1-based) whose prescriptions are optimized; prescription method only.
        #[arg(long)]
        agent: Option<usize>,
        /// Write the strategy as JSON.
        #[arg(long)]
        emit_strategy: Option<PathBuf>,
        /// Write the reached beliefs as JSON.
        #[arg(long)]
        emit_beliefs: Option<PathBuf>,
    },
    /// Exact expected cost of a strategy file written by `solve --emit-strategy`.
    Evaluate {
        instance: String,
        #[arg(long)]
        strategy: PathBuf,
    },
    /// Monte Carlo estimate of a strategy's expected cost.
    Simulate {
        instance: String,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Run every solver and check that their costs agree.
    Compare { instance: String },
    /// Run `compare` on bundled instances (static3 and wom3 by default).
    Demo { names: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Brute,
    CommonInfo,
    Prescription,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

impl From<womctl_core::Error> for Failure {
    fn from(e: womctl_core::Error) -> Self {
        Failure::Core(e)
    }
}
