//! Command-line driver and local session service.

pub mod commands;
pub mod server;

use clap::Parser;

use commands::{CliError, Command, Report};

#[derive(Parser, Debug)]
#[command(name = "forcegame", version, about = "Forcing games over continuous-logic theories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Runs every command except `serve`.
pub fn run(command: &Command) -> Result<Report, CliError> {
    use commands::*;
    match command {
        Command::Parse { formula, theory } => cmd_parse(formula, theory),
        Command::Eval { structure, formula, theory } => cmd_eval(structure, formula, theory),
        Command::Sat { theory, condition } => cmd_sat(theory, condition),
        Command::Force { kind, formula, theory, condition, budget } => cmd_force(*kind, formula, theory, condition, budget),
        Command::Narrow { formula, eps, theory, condition } => cmd_narrow(formula, *eps, theory, condition),
        Command::Play { theory, rounds, seed, exists, forall, replay, out } => {
            cmd_play(theory, *rounds, *seed, exists.as_deref(), *forall, replay.as_deref(), out.as_deref())
        }
        Command::Verify { suite, seed } => cmd_verify(suite, *seed),
        Command::Serve { .. } => Err(CliError::Usage("serve runs an event loop; call server::serve".into())),
    }
}
