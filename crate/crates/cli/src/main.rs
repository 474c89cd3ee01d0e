use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    svplab_cli::run(svplab_cli::Cli::parse())
}
