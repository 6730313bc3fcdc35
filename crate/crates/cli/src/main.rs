//! `cricrank`: fit the career model, summarize chains, run predictive
//! checks and simulate data.

mod config;
mod fit;
mod report;
mod sim;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cricrank::{GmrfError, ModelError, SamplerError};

#[derive(Parser)]
#[command(name = "cricrank", version, about = "Bayesian career ranking of batsmen")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run MCMC chains and write one JSON-lines draw file per chain.
    Fit(FitArgs),
    /// Rank players and tabulate effects from chain files.
    Summarize(SummarizeArgs),
    /// Posterior predictive calibration of ducks and score intervals.
    Ppc(PpcArgs),
    /// Generate a synthetic innings CSV.
    Simulate(SimulateArgs),
}

#[derive(Args)]
pub struct FitArgs {
    /// Innings CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Flat `key = value` settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Iterations after burn-in.
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub burnin: Option<u64>,
    #[arg(long)]
    pub thin: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent chains; chain k uses seed + k - 1.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Write a checkpoint every N iterations.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Adapt proposal scales during burn-in.
    #[arg(long)]
    pub adapt: bool,
    /// Continue from checkpoints in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Stop each chain after this many iterations of the current
    /// invocation, leaving a checkpoint for `--resume`.
    #[arg(long)]
    pub stop_after: Option<u64>,
}

#[derive(Args)]
pub struct ChainInputs {
    /// Innings CSV the chains were fitted to.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Chain files, or directories holding `chain_*.jsonl`.
    #[arg(required = true)]
    pub chains: Vec<PathBuf>,
}

#[derive(Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub inputs: ChainInputs,
    /// Rows of the rank table, and players given ageing curves.
    #[arg(long, default_value_t = 30)]
    pub top: usize,
    /// Baseline for opposition multipliers as `TEAM,DECADE`, e.g. `England,1990`.
    #[arg(long)]
    pub reference: Option<String>,
}

#[derive(Args)]
pub struct PpcArgs {
    #[command(flatten)]
    pub inputs: ChainInputs,
    /// Seed of the predictive simulation of duck totals.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Scenario file of `key = value` lines with JSON values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the true parameters as JSON.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// A failure of the numerics rather than of the inputs.
#[derive(Debug)]
pub struct Numerical(pub String);

impl std::fmt::Display for Numerical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "numerical failure: {}", self.0)
    }
}

impl std::error::Error for Numerical {}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Numerical>() || cause.is::<ModelError>() || cause.is::<GmrfError>() {
            return 3;
        }
        if let Some(s) = cause.downcast_ref::<SamplerError>() {
            if matches!(s, SamplerError::NonFiniteInit | SamplerError::Model(_)) {
                return 3;
            }
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit::run(&a),
        Command::Summarize(a) => report::summarize(&a),
        Command::Ppc(a) => report::ppc(&a),
        Command::Simulate(a) => sim::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn numerical_failures_exit_3() {
        let e = anyhow::Error::new(SamplerError::NonFiniteInit).context("chain 1");
        assert_eq!(exit_code(&e), 3);
        let e = anyhow::Error::new(Numerical("bad state".into()));
        assert_eq!(exit_code(&e), 3);
        let e: anyhow::Error = Err::<(), _>(ModelError::Domain("eta".into())).context("fit").unwrap_err();
        assert_eq!(exit_code(&e), 3);
    }

    #[test]
    fn input_failures_exit_2() {
        let e = anyhow::Error::new(SamplerError::Config("thin".into()));
        assert_eq!(exit_code(&e), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("cannot read x.csv")), 2);
    }
}
