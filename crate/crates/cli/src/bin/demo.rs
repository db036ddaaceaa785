use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use ucore_cli::demo::{run, DemoArgs};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = DemoArgs::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match run(&args, &mut out) {
        Ok(()) => ucore_cli::exit::SUCCESS,
        Err(e) => {
            eprintln!("ucore-demo: {e}");
            e.exit_code()
        }
    };
    let _ = out.flush();
    ExitCode::from(code)
}
