use std::process::ExitCode;

use clap::Parser;
use xrank_cli::{exit_code, run, Cli, Outcome, EXIT_INVALID};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("xrank: {e}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Defects) => {
            eprintln!("xrank: validation defects found");
            ExitCode::from(EXIT_INVALID as u8)
        }
        Err(e) => {
            eprintln!("xrank: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
