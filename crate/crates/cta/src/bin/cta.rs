use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use cta::cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = configure_threads().and_then(|()| run(cli, &mut out));
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cta: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
