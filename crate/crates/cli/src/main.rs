use clap::Parser;

use riccati_spectra_cli::cli::Cli;

fn main() {
    std::process::exit(riccati_spectra_cli::run(&Cli::parse()));
}
