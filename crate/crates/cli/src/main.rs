//! `gvm`: batch front end for the Volterra forward market model.

mod commands;
mod config;
mod error;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{
    CompletenessArgs, Ctx, KernelEvalArgs, Outcome, PortfolioArgs, PriceArgs, PriceRoArgs, SimulateArgs,
    TrackingArgs,
};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Output;

#[derive(Debug, Parser)]
#[command(name = "gvm", version, about = "Volterra forward market model: simulation, completeness, portfolios and pricing")]
struct Cli {
    /// Run configuration (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: config output_dir, else ./gvm-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for stochastic commands
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write SVG plots
    #[arg(long, global = true)]
    plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo forward paths for every traded maturity
    Simulate(SimulateArgs),
    /// Scan the kernel matrix for invertibility up to the first maturity
    Completeness(CompletenessArgs),
    /// Bachelier price and hedge ratio of a vanilla option on a forward
    Price(PriceArgs),
    /// Price a reliability option over a delivery window
    PriceRo(PriceRoArgs),
    /// Optimal CRRA portfolio: closed form, Monte Carlo checks, replication
    Portfolio(PortfolioArgs),
    /// Variance of the gap between a forward and a flow forward
    TrackingError(TrackingArgs),
    /// Evaluate kernels and flow kernels at a point
    KernelEval(KernelEvalArgs),
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::usage("cli", "threads", "--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::usage("cli", "threads", e.to_string()))?;
    }
    let cfg = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let out_dir = match (&cli.out, &cfg) {
        (Some(p), _) => p.clone(),
        (None, Some(c)) if c.output_dir.is_some() => {
            let base = cli.config.as_deref().and_then(|p| p.parent()).unwrap_or(std::path::Path::new("."));
            base.join(c.output_dir.as_ref().unwrap())
        }
        _ => PathBuf::from("gvm-out"),
    };
    let plots = cli.plots || cfg.as_ref().is_some_and(|c| c.emit_plots);
    let seed = cli.seed.or(cfg.as_ref().and_then(|c| c.seed));
    let ctx = Ctx {
        cfg,
        out: Output::new(out_dir, plots),
        seed,
    };
    match &cli.command {
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Completeness(a) => commands::completeness(&ctx, a),
        Command::Price(a) => commands::price(&ctx, a),
        Command::PriceRo(a) => commands::price_ro(&ctx, a),
        Command::Portfolio(a) => commands::portfolio(&ctx, a),
        Command::TrackingError(a) => commands::tracking(&ctx, a),
        Command::KernelEval(a) => commands::kernel_eval(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(o) => {
            println!("{}", o.summary);
            ExitCode::from(o.code as u8)
        }
        Err(e) => {
            eprintln!("error [{}::{}]: {}", e.module, e.op, e.msg);
            ExitCode::from(e.code as u8)
        }
    }
}
