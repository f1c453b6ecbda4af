use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{resolve, CommonArgs, Defaults, Format};

#[derive(Parser, Debug)]
#[command(name = "hmaxwell", version, about = "Stabilized P1 solver for the Laplace-domain Maxwell system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Uniform refinement study against the manufactured solution
    Converge {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Adaptive refinement driven by the residual estimator
    Adapt {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 20)]
        max_iter: usize,
        #[arg(long, default_value_t = 200_000)]
        max_dofs: usize,
        /// Add interior flux jumps to the element indicators
        #[arg(long)]
        edge_jumps: bool,
    },
    /// Single solve with field export and diagnostics
    Solve {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Converge { common } => {
            let cfg = resolve(&common, Defaults { levels: (1, 6), formats: &[Format::Csv, Format::Markdown] })?;
            commands::converge(&cfg)
        }
        Command::Adapt { common, max_iter, max_dofs, edge_jumps } => {
            let cfg = resolve(&common, Defaults { levels: (3, 3), formats: &[Format::Csv, Format::Vtk] })?;
            if cfg.tol.is_none() {
                use clap::CommandFactory;
                Cli::command()
                    .error(clap::error::ErrorKind::MissingRequiredArgument, "adapt requires --tol (or tol in --config)")
                    .exit();
            }
            commands::adapt(&cfg, max_iter, max_dofs, edge_jumps)
        }
        Command::Solve { common } => {
            let cfg = resolve(&common, Defaults { levels: (3, 3), formats: &[Format::Vtk, Format::Csv] })?;
            commands::solve(&cfg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
