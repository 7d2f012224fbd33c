mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = config::resolve(cli.command.name(), cli.command.flags())?;
    let doc = match &cli.command {
        Command::Solve(_) => commands::solve(&cfg)?,
        Command::Limits(_) => commands::limits(&cfg)?,
        Command::Oscillate(_) => commands::oscillate(&cfg)?,
        Command::Costs(_) => commands::costs(&cfg)?,
        Command::Halfgrid(_) => commands::halfgrid(&cfg)?,
        Command::Audit(_) => {
            let (doc, pass) = commands::audit(&cfg)?;
            output::emit(&cfg, &doc)?;
            return if pass { Ok(()) } else { Err(CliError::AuditFailed) };
        }
    };
    output::emit(&cfg, &doc)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("owgame {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
