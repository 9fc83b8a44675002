use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    ExitCode::from(delta_nls_cli::main_with(delta_nls_cli::Cli::parse()))
}
