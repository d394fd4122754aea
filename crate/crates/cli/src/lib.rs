//! Command-line front end: `analyze`, `verify`, `jensen` and `simulate`.
//!
//! Every command produces a [`report::Report`] rendered as text or JSON.
//! Exit codes: 0 pass, 1 input or model error, 2 identity check failed,
//! 3 simulation failed.

pub mod cli;
pub mod commands;
pub mod input;
pub mod report;

use commands::{emit, execute, output_args, CliError};

/// Environment variable capping the worker thread count.
pub const THREADS_VAR: &str = "RICCATI_SPECTRA_THREADS";

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Argument(format!(
            "{THREADS_VAR} must be a positive integer, got {raw:?}"
        ))
    })?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &cli::Cli) -> i32 {
    let result = configure_threads().and_then(|()| {
        let outcome = execute(&cli.command)?;
        emit(&outcome.report, output_args(&cli.command))?;
        Ok(outcome.status)
    });
    match result {
        Ok(status) => status as i32,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_status() as i32
        }
    }
}
