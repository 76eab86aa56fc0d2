//! `dfrelay`: CSV front end for the decode-forward relay model. Maps and
//! curves reproduce the reference figures at desk scale; `verify` pits
//! every closed form against its oracle.
//!
//! Exit codes: 0 success, 2 validation/usage error, 3 runtime failure
//! (numerics or I/O), 4 verification failure.

mod args;
mod config;
mod csvout;
mod maps;
mod outage;
mod verify;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use dfrelay_core::CoreError;

use crate::config::Overridable;

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
    Verification,
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Runtime(_) => 3,
            Self::Verification => 4,
        }
    }
}

impl From<CoreError> for Failure {
    fn from(err: CoreError) -> Self {
        if err.is_validation() {
            Self::Validation(err.to_string())
        } else {
            Self::Runtime(err.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dfrelay",
    version,
    about = "Decode-forward relaying: regime/rate/savings maps, outage curves, self-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Operating-regime tag per relay position (pathloss only).
    RegimeMap(maps::RegimeArgs),
    /// Mean-rate comparison of two CSI models per relay position.
    RateMap(maps::RateArgs),
    /// Outage probability versus SNR at a fixed relay position.
    OutageCurve(outage::OutageArgs),
    /// Expected relay-power savings per relay position.
    SavingsMap(maps::SavingsArgs),
    /// Closed forms against their oracles; nonzero exit on any failure.
    Verify(verify::VerifyArgs),
}

fn apply_config(path: Option<std::path::PathBuf>, target: &mut dyn Overridable) -> Result<(), Failure> {
    if let Some(path) = path {
        config::apply_file(&path, target).map_err(Failure::Validation)?;
    }
    Ok(())
}

fn init_pool(workers: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Failure::Validation("workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::RegimeMap(mut a) => {
            apply_config(a.common.config.clone(), &mut a)?;
            init_pool(a.common.workers)?;
            maps::run_regime(&a)
        }
        Command::RateMap(mut a) => {
            apply_config(a.common.config.clone(), &mut a)?;
            init_pool(a.common.workers)?;
            maps::run_rate(&a)
        }
        Command::OutageCurve(mut a) => {
            apply_config(a.common.config.clone(), &mut a)?;
            init_pool(a.common.workers)?;
            outage::run_outage(&a)
        }
        Command::SavingsMap(mut a) => {
            apply_config(a.common.config.clone(), &mut a)?;
            init_pool(a.common.workers)?;
            maps::run_savings(&a)
        }
        Command::Verify(mut a) => {
            apply_config(a.common.config.clone(), &mut a)?;
            init_pool(a.common.workers)?;
            verify::run_verify(&a)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            err.print().expect("writing clap error");
            std::process::exit(code);
        }
    };
    if let Err(failure) = run(cli.command) {
        match &failure {
            Failure::Validation(msg) => eprintln!("error: {msg}"),
            Failure::Runtime(msg) => eprintln!("error: {msg}"),
            Failure::Verification => eprintln!("error: verification failed"),
        }
        std::process::exit(failure.exit_code());
    }
}
