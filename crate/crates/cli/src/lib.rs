//! Command-line front end: frame folders in, ED/ES results, curves and plots
//! out.
//!
//! Exit codes: 0 success, 1 input or parameter error, 2 degenerate detection.

pub mod args;
pub mod commands;
pub mod io;
pub mod plot;

pub use args::{Cli, Command};

/// Runs one subcommand and returns its exit code. Errors map to 1.
pub fn run(cli: &Cli) -> u8 {
    let outcome = match &cli.command {
        Command::Detect(a) => commands::detect(a),
        Command::Phantom(a) => commands::phantom(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::EXIT_INPUT
        }
    }
}
