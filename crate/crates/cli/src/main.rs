mod args;
mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use thiserror::Error;

use args::Cli;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(#[from] canard_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

fn parse(argv: &[OsString]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(argv)
}

fn run(argv: Vec<OsString>) -> u8 {
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(e) => return clap_exit(e),
    };
    let cli = match &cli.config {
        None => cli,
        Some(path) => {
            let merged = config::read(path).and_then(|entries| config::inject(&argv, cli.command.name(), &entries));
            match merged {
                Ok(argv) => match parse(&argv) {
                    Ok(c) => c,
                    Err(e) => return clap_exit(e),
                },
                Err(e) => return fail(&e),
            }
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}

fn clap_exit(e: clap::Error) -> u8 {
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
        _ => 1,
    }
}

fn fail(e: &CliError) -> u8 {
    let kind = match e {
        CliError::Numerical(_) => "numerical failure",
        _ => "error",
    };
    eprintln!("canard: {kind}: {e}");
    e.code()
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os().collect()))
}
