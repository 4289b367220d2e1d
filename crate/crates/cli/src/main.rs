use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use forcegame_cli::commands::Command;
use forcegame_cli::{run, server, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Serve { addr, transcripts } = &cli.command {
        let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
        return match rt.block_on(server::serve(*addr, transcripts.clone())) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    match run(&cli.command) {
        Ok(r) => {
            // A closed pipe is not a failure of the command.
            let _ = writeln!(std::io::stdout(), "{}", r.body);
            if r.passed { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code() as u8)
        }
    }
}
