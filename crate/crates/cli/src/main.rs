//! Command-line driver for the latent-productivity distribution test.
//!
//! Four subcommands cover the workflow end to end: `simulate` writes a
//! synthetic panel with known ground truth, `test` runs the bootstrap test
//! on a panel CSV, `montecarlo` runs scripted size / power / bias-order
//! experiments, and `report` re-renders a results file as a table. All
//! randomness flows from one master seed, so any run can be reproduced from
//! the `effective_config.toml` it leaves next to its artifacts.

mod commands;
mod config;
mod table;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "panelks", version, about = "Distribution-equality tests for latent firm productivity estimated from panel data")]
struct Cli {
    /// Worker threads for bootstrap and Monte Carlo loops (0 = all cores).
    /// Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic two-area panel plus its ground truth.
    Simulate(commands::simulate::SimulateArgs),
    /// Test equality of the two areas' TFP distributions per sector.
    Test(commands::test::TestArgs),
    /// Run a scripted Monte Carlo experiment (size, power, bias order).
    Montecarlo(commands::montecarlo::MontecarloArgs),
    /// Render a results.csv as a plain-text table.
    Report(commands::report::ReportArgs),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("cannot size the worker pool")?;
    }
    match &cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Test(args) => commands::test::run(args),
        Command::Montecarlo(args) => commands::montecarlo::run(args),
        Command::Report(args) => commands::report::run(args),
    }
}
