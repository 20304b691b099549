use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let invocation = levytrim::cli::CliInvocation::parse();
    ExitCode::from(levytrim::cli::run(&invocation))
}
