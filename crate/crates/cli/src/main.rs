//! `miaudit`: membership-inference audits of generative models from the
//! command line.
//!
//! Exit status is 0 on success, 1 on data or runtime errors and 2 on usage
//! errors (bad flags, missing or incompatible inputs).

mod attack;
mod fit_pca;
mod manifest;
mod scenario;
mod simulate;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use miaudit::distances::{ComputeOptions, DEFAULT_MEM_BUDGET};

#[derive(Debug, Parser)]
#[command(
    name = "miaudit",
    version,
    about = "Membership-inference audits of generative models"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MIAUDIT_THREADS")]
    threads: Option<usize>,

    /// Bytes of sample rows held in memory per streamed chunk.
    #[arg(long, global = true, default_value_t = DEFAULT_MEM_BUDGET)]
    mem_budget: usize,

    /// Seed for all randomness; drawn from system entropy when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Fit a PCA projection on reference data.
    FitPca(fit_pca::Args),
    /// Score records with one attack.
    Attack(attack::Args),
    /// Run the single and set MI scenarios on a score file.
    Scenario(scenario::Args),
    /// Draw synthetic records, generator samples or reconstructions.
    #[command(subcommand)]
    Simulate(simulate::Command),
    /// Operate on scenario reports.
    #[command(subcommand)]
    Report(scenario::ReportCommand),
}

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Global {
    pub threads: Option<usize>,
    pub mem_budget: usize,
    seed: Option<u64>,
}

impl Global {
    pub fn compute(&self) -> ComputeOptions {
        ComputeOptions {
            mem_budget: self.mem_budget,
            threads: None,
        }
    }

    /// The run seed and where it came from.
    pub fn seed(&self) -> (u64, &'static str) {
        match self.seed {
            Some(s) => (s, "flag"),
            None => (rand::random(), "entropy"),
        }
    }
}

/// Missing or incompatible inputs; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be ≥ 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let global = Global {
        threads: cli.threads,
        mem_budget: cli.mem_budget,
        seed: cli.seed,
    };
    match cli.command {
        Command::FitPca(args) => fit_pca::run(args, &global),
        Command::Attack(args) => attack::run(args, &global),
        Command::Scenario(args) => scenario::run(args, &global),
        Command::Simulate(cmd) => simulate::run(cmd, &global),
        Command::Report(cmd) => scenario::run_report(cmd, &global),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
