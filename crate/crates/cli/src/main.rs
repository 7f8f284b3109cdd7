use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

mod commands;
mod config;
mod output;

use config::{Cli, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input data, or a failure while producing outputs.
    #[error("{0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl From<impactsim::Error> for CliError {
    fn from(e: impactsim::Error) -> Self {
        use impactsim::Error as E;
        match e {
            E::InvalidParameter(_) | E::Precondition(_) => CliError::Config(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = RunConfig::from_command(&cli.command).and_then(|rc| commands::run(&rc));
    match result {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("impactsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
