//! The `bru` command line: dataset validation, runs, scoring, reports and the
//! review API server.

pub mod args;
pub mod commands;
pub mod error;
pub mod server;

use std::process::ExitCode;

pub use args::Cli;
pub use error::CliError;

use args::Command;
use commands::Context;

/// Execute a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Validate(a) => commands::validate(&ctx, a),
        Command::Run(a) => commands::run(&ctx, a),
        Command::Score(a) => commands::score_cmd(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
        Command::Plot(a) => commands::plot(&ctx, a),
        Command::Detect(a) => commands::detect(&ctx, a),
        Command::Replay(a) => commands::replay(&ctx, a),
        Command::Review { command } => commands::review(&ctx, command),
    }
}

/// [`execute`], reporting errors on stderr and mapping them to exit codes.
pub fn main_with(cli: &Cli) -> ExitCode {
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
