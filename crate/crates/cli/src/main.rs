mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MARKERFORGE_LOG", "warn")).init();
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand is required");
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a, sub),
        Command::Match(a) => commands::run_match(a, sub),
        Command::Losses(a) => commands::losses(a, sub),
        Command::Bench(a) => commands::bench(a, sub),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("markerforge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
