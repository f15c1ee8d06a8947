use std::process::ExitCode;

use clap::Parser;
use pcdet_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pcdet: {e}");
            e.exit_code()
        }
    }
}
