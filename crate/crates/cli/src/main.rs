use std::io::Write;
use std::process::ExitCode;

use gap_persistence_cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = <Cli as clap::Parser>::parse();
    let result = run(&cli).and_then(|bytes| match &cli.out {
        Some(path) => std::fs::write(path, &bytes).map_err(Into::into),
        None => std::io::stdout().write_all(&bytes).map_err(Into::into),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
