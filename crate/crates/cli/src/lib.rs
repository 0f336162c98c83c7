//! Batch front end for `bayes-cox`: dataset and draws files, TOML
//! configuration and the `simulate`, `fit`, `compare`, `curves` and
//! `replicate` commands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::{CliError, CliResult};

use args::{Cli, Command};

/// Executes one parsed command, printing progress lines to stdout.
pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => {
            let files = commands::simulate(a)?;
            println!("wrote {} files to {}", files.len(), a.out.display());
        }
        Command::Fit(a) => {
            let result = commands::fit(a);
            match &result {
                Ok(_) | Err(CliError::Convergence(_)) => {
                    println!("wrote draws.csv and summary.txt to {}", a.out.display())
                }
                Err(_) => {}
            }
            result?;
        }
        Command::Compare(a) => {
            for line in commands::compare(a)? {
                println!("{line}");
            }
        }
        Command::Curves(a) => {
            commands::curves(a)?;
            println!("wrote {}", a.out.display());
        }
        Command::Replicate(a) => {
            commands::replicate(a)?;
            println!("wrote {}", a.out.display());
        }
    }
    Ok(())
}
