use anyhow::Context;
use clap::Parser;

mod commands;

/// Scene-driven runner for intrinsic distances, action functions,
/// Hamilton-Jacobi flows, verification checks, the Dirichlet solver and the
/// patching construction.
#[derive(Parser)]
#[command(name = "hjflow", version, about)]
struct Cli {
    /// Cap for the worker thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: commands::Command,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .context("thread pool already initialized")?;
    }
    let status = commands::run(cli.command)?;
    std::process::exit(status);
}
