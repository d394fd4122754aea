use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "riccati-spectra",
    version,
    about = "Verify Kalman–Bucy filtering identities for linear systems",
    after_help = "Exit codes: 0 pass, 1 input or model error, 2 identity check failed, \
                  3 simulation failed.\nRICCATI_SPECTRA_THREADS caps the worker threads."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Riccati equation and check the frequency-integral trace identity.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Run `analyze` plus the zeros/poles, Bode and reduced-form checks.
    ///
    /// Without any --with-* flag every check runs.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Trace from the zeros and poles of the output spectral density.
        #[arg(long)]
        with_zeros_poles: bool,
        /// Bode-type integral of the filter's sensitivity function.
        #[arg(long)]
        with_bode: bool,
        /// Reduced forms (scalar output, stationary, V = I, W = 0, scalar system).
        #[arg(long)]
        with_special_cases: bool,
    },
    /// Check the half-plane Jensen formula for f = p/q.
    Jensen {
        /// Numerator coefficients, constant term first, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        numerator: Vec<f64>,
        /// Denominator coefficients, constant term first, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        denominator: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Mode::General)]
        mode: Mode,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo check of the steady-state error covariance and innovation whiteness.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 200.0)]
        t_end: f64,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = GainModeArg::Steady)]
        gain_mode: GainModeArg,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// System file (JSON, schema_version "1").
    pub path: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Tolerance for identity verdicts; quadrature runs at tol·1e-3.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// All poles in the open left half-plane.
    StablePoles,
    /// Poles anywhere off the imaginary axis.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GainModeArg {
    Steady,
    Transient,
}
