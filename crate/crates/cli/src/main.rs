mod args;
mod commands;
mod error;

use std::io::Write;
use std::panic;
use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::{CliError, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE};

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // Built explicitly so no environment variable is consulted.
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Synth(a) => commands::synth::run(&a, &mut out),
        Command::Run(a) => commands::run::run(&a, &mut out),
        Command::Eval(a) => commands::eval::run(&a, &mut out),
        Command::Inspect(a) => commands::inspect::run(&a, &mut out),
    };
    out.flush().ok();
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK } as u8);
        }
    };
    init_logging(cli.verbose);
    match panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(())) | Ok(Err(CliError::Closed)) => ExitCode::from(EXIT_OK as u8),
        Ok(Err(e)) => {
            eprintln!("coevo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL as u8),
    }
}
