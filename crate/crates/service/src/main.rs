use std::process::ExitCode;

use clap::Parser;
use flexnet_service::cli::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
