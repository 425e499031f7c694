//! `damp` — reproducible pipelines over the core library: generate a corpus,
//! train a classifier, attack it, evaluate defenses, and render reports.
//!
//! Every command is a pure function of its input files and flags; nothing is
//! seeded from the clock, so reruns are byte-identical. The `DAMP_OUT`
//! environment variable redirects relative output paths into a chosen
//! directory.

mod commands;

use clap::error::ErrorKind;
use clap::Parser;
use commands::{Cli, CliError};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                CliError::Usage(_) => 1,
                CliError::EmptyFilteredSet => 2,
                CliError::Io(_) | CliError::Artifact(_) => 3,
            })
        }
    }
}
