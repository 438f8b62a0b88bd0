use std::process::ExitCode;

use clap::Parser;
use tcm::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TCM_LOG", "error")).init();
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_kind() as u8)
        }
        Err(_) => {
            eprintln!("error[InternalError]: panic");
            ExitCode::from(4)
        }
    }
}
