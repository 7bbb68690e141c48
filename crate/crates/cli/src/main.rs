//! `rvolmin` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 parse error,
//! 4 numeric failure.

mod args;
mod commands;
mod error;
mod io;

use clap::Parser;

use args::{Cli, Command};
use error::CliResult;

/// Runs `cli`; `argv` is the argument vector recorded in manifests.
fn run(cli: Cli, argv: &[String]) -> CliResult<()> {
    match cli.command {
        Command::Factorize(a) => commands::factorize(&a, argv),
        Command::Synth(a) => commands::synth(&a, argv),
        Command::Bench(a) => commands::bench(&a, argv),
        Command::CheckScatter(a) => commands::check_scatter(&a, argv),
        Command::Replay { manifest } => {
            let recorded = commands::replay_argv(&manifest)?;
            let cli = Cli::try_parse_from(&recorded)
                .map_err(|e| error::CliError::Usage(e.to_string()))?;
            run(cli, &recorded)
        }
    }
}

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli, &argv) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
