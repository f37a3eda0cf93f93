//! `epinet`: run baselines, calibrations and counterfactual scenarios.
//!
//! Exit status is 0 on success, 1 for unusable input (configuration, data,
//! scenario files) and 2 when a model invariant is violated.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epinet_core::EpiError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(EpiError),
    Check(String),
}

impl From<EpiError> for CliError {
    fn from(e: EpiError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_invariant_violation() => 2,
            CliError::Core(_) => 1,
            CliError::Check(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Check(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "epinet", version, about = "Network epidemic simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON job configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Number of stochastic runs.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fitted parameters written by `calibrate`.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the recorded policy timeline.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit parameters to the observed hospital and death series.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Skip the coordinate sweeps.
        #[arg(long)]
        stage1_only: bool,
        /// Reuse scores from an earlier leaderboard.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Fit against data simulated from the configured parameters and
        /// check that the search beats the range midpoints.
        #[arg(long)]
        self_test: bool,
    },
    /// Run a counterfactual scenario.
    Scenario {
        #[command(flatten)]
        common: Common,
        /// Scenario JSON; defaults to the `scenario` entry of the config.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Also run the recorded timeline and write a joined table.
        #[arg(long)]
        compare_baseline: bool,
        /// Testing start days for scenario 9, one output set each.
        #[arg(long, value_delimiter = ',')]
        t0: Vec<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common } => commands::simulate(&common),
        Command::Calibrate {
            common,
            stage1_only,
            resume,
            self_test,
        } => commands::calibrate(&common, stage1_only, resume.as_deref(), self_test),
        Command::Scenario {
            common,
            scenario,
            compare_baseline,
            t0,
        } => commands::scenario(&common, scenario.as_deref(), compare_baseline, &t0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
