//! Command-line front end: information tables, Monte Carlo checks,
//! extraction-rate curves, parity-readout scans, and estimator harnesses
//! for monitored two-level probes.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Command, OutputFormat, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "trajfisher",
    version,
    about = "Information analysis for continuously monitored two-level probes"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form information table over the cycle-length grid
    Analytic(RunArgs),
    /// Monte Carlo trajectory estimates next to the closed forms
    Simulate(RunArgs),
    /// Optimized extraction rates against the cycle length
    Rates(RunArgs),
    /// Parity-readout information against the readout interval
    Qec(RunArgs),
    /// Estimator scatter against the information bounds
    Estimate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Key = value run configuration file
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed (TRAJFISHER_SEED is the fallback)
    #[arg(long)]
    seed: Option<u64>,
    /// Thread count; changes wall time, never the numbers
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Write here instead of stdout (atomic rename)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Analytic(a) => (Command::Analytic, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Rates(a) => (Command::Rates, a),
        Cmd::Qec(a) => (Command::Qec, a),
        Cmd::Estimate(a) => (Command::Estimate, a),
    };

    if let Some(workers) = args.workers {
        // ignore a failure to re-initialize: the pool is process-global
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers as usize)
            .build_global();
    }

    let text = match std::fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };

    let overrides = Overrides {
        seed: args.seed,
        format: args.format.map(|f| match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }),
    };
    let env_seed = std::env::var("TRAJFISHER_SEED").ok();
    let config = match RunConfig::build(command, &text, &overrides, env_seed.as_deref()) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };

    let rendered = match commands::run(&config) {
        Ok(result_table) => result_table.render(config.format),
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(1);
        }
    };

    match &args.out {
        Some(path) => {
            if let Err(e) = output::write_atomic(path, rendered.as_bytes()) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::SUCCESS
}
