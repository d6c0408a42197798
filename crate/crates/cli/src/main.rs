use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod auction;
mod serve;
mod simulate;

/// Exit codes: 0 success or filled, 1 unfilled or failed check, 2 bad input, 3 runtime error.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "osp",
    version,
    about = "Optional second price ad exchange tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clear one auction from a JSON bid file.
    Auction {
        file: PathBuf,
        /// `lowest` or `seeded:<u64>`
        #[arg(long, default_value = "lowest")]
        tie_rule: String,
    },
    /// Monte Carlo publisher loss against the exact value.
    Simulate(simulate::SimulateArgs),
    /// Compare all-honest OSP against a global second price over random markets.
    Crosscheck(simulate::CrosscheckArgs),
    /// Run the exchange service.
    Serve {
        config: PathBuf,
        /// Override the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Run a network endpoint bidding from a static book.
    MockNetwork(serve::MockArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Auction { file, tie_rule } => auction::run(&file, &tie_rule),
        Command::Simulate(args) => simulate::run(&args),
        Command::Crosscheck(args) => simulate::crosscheck(&args),
        Command::Serve { config, listen } => serve::serve(&config, listen),
        Command::MockNetwork(args) => serve::mock_network(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
