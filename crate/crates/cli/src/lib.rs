//! Commands behind the `rps` binary.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod formats;

/// Error with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    /// Bad input data, domain or validation failure (exit 1).
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    /// Reading or writing failed (exit 2).
    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<rps_core::Error> for CliError {
    fn from(e: rps_core::Error) -> Self {
        match e {
            rps_core::Error::Io { .. } => CliError::io(e.to_string()),
            other => CliError::invalid(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rps", version, about = "Seeded district-plan ensembles on a county graph")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grow an ensemble of plans and write one JSON record per plan.
    Generate(GenerateArgs),
    /// Score a single plan file.
    Evaluate(EvaluateArgs),
    /// Histogram one metric of an ensemble with reference overlays.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Directory holding counties.csv, adjacency.csv, splits.csv, seeds.csv.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub runs: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Population standard deviation (percentage points) at or below which a plan is good.
    #[arg(long, default_value_t = 1.0)]
    pub good_threshold: f64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write duplicate runs, marked with `duplicate_of`.
    #[arg(long)]
    pub keep_all: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// CSV with `county_name,district_label` rows.
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Output of `generate`.
    #[arg(long)]
    pub ensemble: PathBuf,
    /// JSON array of reference plan records.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub metric: String,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Only histogram plans flagged good.
    #[arg(long)]
    pub good_only: bool,
}

/// Runs a parsed command, returning the process exit code.
pub fn run(cli: Cli) -> i32 {
    let res = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Compare(a) => commands::compare(&a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let io = rps_core::Error::Io {
            path: "x".into(),
            source: std::io::Error::other("disk"),
        };
        assert_eq!(CliError::from(io).code, 2);
        assert_eq!(CliError::from(rps_core::Error::MissingFile("seeds.csv".into())).code, 1);
        assert_eq!(CliError::from(rps_core::Error::Validation("bad".into())).code, 1);
    }

    #[test]
    fn arguments_parse_with_defaults() {
        let cli = Cli::try_parse_from([
            "rps", "generate", "--data", "d", "--runs", "5", "--seed", "1", "--out", "o",
        ])
        .unwrap();
        match cli.command {
            Command::Generate(a) => {
                assert_eq!(
                    (a.runs, a.seed, a.good_threshold, a.workers, a.keep_all),
                    (5, 1, 1.0, None, false)
                );
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["rps", "generate", "--runs", "5"]).is_err());
    }
}
