//! `ifslab`: attractors, connectivity verdicts, witnesses, operator reports
//! and parameter sweeps driven by flat config files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ifslab", version, about = "Certified attractors and connectivity of affine IFS")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key=value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config entry (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for randomized batches
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certified attractor cloud
    Attractor,
    /// Connectivity verdict of the configured system
    Classify {
        /// Recompute the configured witness and attach it
        #[arg(long)]
        witness: bool,
    },
    /// Build T, w and e from a contraction, or run a random batch
    Witness,
    /// Classify a 1D or 2D grid of translations
    Sweep,
    /// Norms, defect spectrum, contractions and identity residuals of a matrix
    OperatorReport,
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let ctx = Context {
        cfg: RunConfig::load(cli.config.as_deref(), &cli.overrides)?,
        out: cli.out,
        seed: cli.seed,
    };
    match cli.command {
        Command::Attractor => commands::attractor_cmd(&ctx),
        Command::Classify { witness } => commands::classify_cmd(&ctx, witness),
        Command::Witness => commands::witness_cmd(&ctx),
        Command::Sweep => commands::sweep_cmd(&ctx),
        Command::OperatorReport => commands::operator_report_cmd(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // reader went away, e.g. `ifslab attractor | head`
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ifslab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
