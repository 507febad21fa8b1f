mod commands;
mod settings;
mod writer;

use std::process::ExitCode;

use clap::Parser;

use settings::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fxnet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
