//! `willmore`: experiment driver for conformally constrained Willmore tori.

mod commands;
mod config;
mod error;
mod mesh;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "willmore", version, about = "Willmore energy minimization of tori in a fixed conformal class")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Energy, Gauss-Bonnet terms, modulus, conformal factor, rank and EL residual.
    Analyze,
    /// Constrained descent; writes the iteration log, final mesh and report.
    Minimize,
    /// Runs the self-check suites.
    Verify,
    /// Warm-started minimization over a range of Im tau.
    Sweep,
    /// Solves the synthetic quadratic IFT family and checks the error bound.
    IftDemo,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(&cli.flags)?;
    log::debug!("{cfg:?}");
    match cli.command {
        Command::Analyze => commands::analyze(&cfg),
        Command::Minimize => commands::minimize(&cfg),
        Command::Verify => commands::verify(&cfg),
        Command::Sweep => commands::sweep_cmd(&cfg),
        Command::IftDemo => commands::ift_demo(&cfg),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
