//! Thin command-line front end; all logic lives in the library.
//!
//! Exit codes: 0 success, 2 config error, 3 vacuum/blow-up termination,
//! 4 verification failure, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use evlab::cli;
use evlab::error::Error;
use evlab::picard::Outcome;
use evlab::propagators::Termination;

#[derive(Parser)]
#[command(
    name = "evlab",
    version,
    about = "Pseudo-spectral laboratory for a viscous shallow-water system with friction and capillarity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured system and write snapshots plus diagnostics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the seed of the initial-data block.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Norm reports for a stored field snapshot.
    Besov {
        #[arg(long)]
        config: PathBuf,
        /// EVF1 snapshot to analyze.
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fixed-point iteration from the configured initial data.
    Picard {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Momentum-amplitude threshold sweep across depth families.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the verification suite (all checks, or one with --only).
    Verify {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run a single named check.
        #[arg(long)]
        only: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::InvalidParams(_)
        | Error::InvalidGrid(_)
        | Error::TooCoarse(_)
        | Error::Json(_)
        | Error::Format(_) => 2,
        Error::VacuumBreach { .. } => 3,
        Error::VerificationFailed(_) => 4,
        _ => 1,
    }
}

fn load(config: &std::path::Path, seed: Option<u64>) -> Result<cli::RunConfig, Error> {
    let mut cfg = cli::parse_config(config)?;
    if let Some(seed) = seed {
        cfg.initial.seed = seed;
    }
    Ok(cfg)
}

fn run() -> Result<u8, Error> {
    match Cli::parse().command {
        Command::Simulate { config, out, seed } => {
            let cfg = load(&config, seed)?;
            let termination = cli::cmd_simulate(&cfg, &out)?;
            match termination {
                Termination::Completed => Ok(0),
                Termination::Vacuum { t, min_h } => {
                    eprintln!("run truncated by vacuum at t = {t}: min h = {min_h}");
                    Ok(3)
                }
                Termination::BlowUp { t } => {
                    eprintln!("run truncated by blow-up at t = {t}");
                    Ok(3)
                }
            }
        }
        Command::Besov { config, field, out } => {
            let cfg = load(&config, None)?;
            let reports = cli::cmd_besov(&cfg, &field, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&reports)?);
            Ok(0)
        }
        Command::Picard { config, out, seed } => {
            let cfg = load(&config, seed)?;
            let trace = cli::cmd_picard(&cfg, &out)?;
            println!(
                "outcome: {:?} after {} iterations (max ratio {:?})",
                trace.outcome,
                trace.rows.len().saturating_sub(1),
                trace.max_ratio()
            );
            match trace.outcome {
                Outcome::Vacuum => Ok(3),
                _ => Ok(0),
            }
        }
        Command::Sweep { config, out, seed } => {
            let cfg = load(&config, seed)?;
            let sweeps = cli::cmd_sweep(&cfg, &out)?;
            for fam in &sweeps {
                println!(
                    "{}: min h0 = {:.3}, bracket [{:?}, {:?}]",
                    fam.label, fam.min_h0, fam.largest_converged, fam.smallest_failed
                );
            }
            Ok(0)
        }
        Command::Verify { out, only, seed } => {
            let all_pass = cli::cmd_verify(seed, only.as_deref(), out.as_deref())?;
            if all_pass {
                Ok(0)
            } else {
                Ok(4)
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
