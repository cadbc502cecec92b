//! `sasi`: batch driver for the SASI cryptanalysis workbench.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or parse error.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sasi_core::RotationVariant;

#[derive(Parser)]
#[command(name = "sasi", version, about = "Simulate SASI sessions and run passive attacks on recorded traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Modular,
    Hamming,
}

impl From<VariantArg> for RotationVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Modular => RotationVariant::Modular,
            VariantArg::Hamming => RotationVariant::Hamming,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Fig2,
    Distribution,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Record the wall-clock time in the run manifest (breaks byte-identical reruns).
    #[arg(long)]
    timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate consecutive honest sessions of a fresh random tag and write a trace.
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "modular")]
        variant: VariantArg,
        #[arg(long)]
        sessions: u64,
        /// Trace output path.
        #[arg(long)]
        out: PathBuf,
        /// Where to write the true ID residues (default: <out>.secrets.json).
        #[arg(long)]
        secrets: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run an attack over a recorded trace.
    Attack {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 96)]
        modulus: u64,
        #[arg(long, value_enum, default_value = "fig2")]
        mode: ModeArg,
        /// Maximum number of sessions to consume.
        #[arg(long, default_value_t = sasi_core::attack::DEFAULT_SESSION_BUDGET)]
        budget: u64,
        /// Expected variant; the trace header must agree.
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Recorded in the manifest only; attacks are deterministic.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON summary path; the histogram CSV goes next to it.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate residue-recovery probabilities per modulus class.
    Table1 {
        #[arg(long, value_delimiter = ',', default_values_t = [128u64, 64, 96, 48, 106, 101])]
        moduli: Vec<u64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare an attack report against the secrets file written by `simulate`.
    Score {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        secrets: PathBuf,
        /// Write the score JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Measure how the filtered attack's guess evolves with the number of sessions.
    Efficiency {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "modular")]
        variant: VariantArg,
        #[arg(long, default_value_t = 96)]
        modulus: u64,
        #[arg(long, default_value_t = 1 << 20)]
        max_sessions: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
