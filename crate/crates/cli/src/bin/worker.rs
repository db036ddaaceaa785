use std::process::ExitCode;

use clap::Parser;
use ucore_cli::worker::{run, WorkerArgs, WorkerCliConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = WorkerArgs::parse();
    let cfg = match WorkerCliConfig::resolve(args, |k| std::env::var(k).ok()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("ucore-worker: {e}");
            return ExitCode::from(ucore_cli::exit::USAGE);
        }
    };
    ExitCode::from(run(&cfg))
}
