use std::process::ExitCode;

use clap::Parser;
use mbqv_cli::{parse_config, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match parse_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
