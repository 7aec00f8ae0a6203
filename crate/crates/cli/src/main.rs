use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = reflectlab_cli::Cli::parse();
    ExitCode::from(reflectlab_cli::main_with(cli))
}
