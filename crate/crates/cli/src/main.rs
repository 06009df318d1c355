//! `mrperf`: profile a (simulated) cluster, fit phase cost models, and
//! predict MapReduce job completion times.
//!
//! Exit codes: 0 ok, 2 bad input, 3 bad or insufficient data, 4 usage,
//! 5 evaluation gate breached.

use std::process::ExitCode;

use clap::Parser;

mod commands;
mod manifest;

use commands::{Command, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "mrperf", version, about = "MapReduce phase cost models and job time prediction")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
