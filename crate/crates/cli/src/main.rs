use std::process::ExitCode;

use clap::Parser;
use tablestruct_cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
