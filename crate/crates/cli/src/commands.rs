use std::fs;
use std::path::PathBuf;

use thiserror::Error;

use riccati_spectra::jensen::{verify_jensen, JensenError, JensenMode, RationalFunction};
use riccati_spectra::linalg::eigenvalues;
use riccati_spectra::riccati::{residual_bound, RiccatiError};
use riccati_spectra::simulate::{
    run_monte_carlo, whiteness_check, GainMode, SimulationConfig, SimulationError,
};
use riccati_spectra::spectral::{
    bode_sensitivity_integral, special_case_checks, trace_bounds, verify_integral_identity,
    zeros_poles_form, CaseStatus, PopovEvaluator, SpectralError,
};
use riccati_spectra::{solve_care, CareSolution, SystemModel};

use crate::cli::{Command, Common, Format, GainModeArg, Mode, OutputArgs};
use crate::input::{self, InputError, SystemFile, SCHEMA_VERSION};
use crate::report::{
    complex_list, matrix, BodeSection, BoundsSection, CareSection, Check, JensenSection, LagEntry,
    ModelSection, Report, ResidualEntry, SimulationSection, SpecialCaseEntry, SpectralSection,
    Verdict, WhitenessSection, ZerosPolesSection,
};

/// Relative gap between simulated and Riccati output covariance that still
/// counts as agreement.
pub const SIMULATION_GAP_TOLERANCE: f64 = 0.05;
const FREQUENCY_SAMPLES: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    InputError = 1,
    IdentityFailure = 2,
    SimulationFailure = 3,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error("identity check could not be evaluated: {0}")]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Jensen(#[from] JensenError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Spectral(_) => ExitStatus::IdentityFailure,
            CliError::Simulation(SimulationError::Config(_)) => ExitStatus::InputError,
            CliError::Simulation(_) => ExitStatus::SimulationFailure,
            _ => ExitStatus::InputError,
        }
    }
}

pub struct Outcome {
    pub report: Report,
    pub status: ExitStatus,
}

/// Quadrature tolerance used for a verdict tolerance `tol`.
pub fn quadrature_tolerance(tol: f64) -> f64 {
    (tol * 1e-3).clamp(1e-12, 1e-3)
}

fn check_tolerance(tol: f64) -> Result<(), CliError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(CliError::Argument(format!(
            "--tol must be positive and finite, got {tol}"
        )))
    }
}

pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Analyze { common } => checks(common, Extras::default()),
        Command::Verify {
            common,
            with_zeros_poles,
            with_bode,
            with_special_cases,
        } => {
            let any = *with_zeros_poles || *with_bode || *with_special_cases;
            checks(
                common,
                Extras {
                    zeros_poles: *with_zeros_poles || !any,
                    bode: *with_bode || !any,
                    special_cases: *with_special_cases || !any,
                },
            )
        }
        Command::Jensen {
            numerator,
            denominator,
            mode,
            output,
        } => jensen(numerator, denominator, *mode, output),
        Command::Simulate {
            common,
            dt,
            t_end,
            trials,
            seed,
            gain_mode,
        } => simulate(
            common,
            SimulationConfig {
                dt: *dt,
                t_end: *t_end,
                trials: *trials,
                seed: *seed,
                gain_mode: match gain_mode {
                    GainModeArg::Steady => GainMode::Steady,
                    GainModeArg::Transient => GainMode::Transient,
                },
                ..SimulationConfig::default()
            },
        ),
    }
}

/// Renders the report in the requested format and writes it out.
pub fn emit(report: &Report, output: &OutputArgs) -> Result<(), CliError> {
    let text = match output.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    match &output.output {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn output_args(command: &Command) -> &OutputArgs {
    match command {
        Command::Analyze { common }
        | Command::Verify { common, .. }
        | Command::Simulate { common, .. } => &common.output,
        Command::Jensen { output, .. } => output,
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Extras {
    zeros_poles: bool,
    bode: bool,
    special_cases: bool,
}

fn model_section(file: &SystemFile, model: &SystemModel) -> Result<ModelSection, CliError> {
    let spectrum = eigenvalues(model.a()).map_err(RiccatiError::from)?;
    Ok(ModelSection {
        label: file.label.clone(),
        states: model.state_dim(),
        outputs: model.output_dim(),
        eigenvalues: complex_list(&spectrum.sorted()),
        symmetrized: model
            .validation()
            .symmetrized
            .iter()
            .map(ToString::to_string)
            .collect(),
    })
}

fn care_section(model: &SystemModel, care: &CareSolution) -> CareSection {
    CareSection {
        p: matrix(care.p()),
        k: matrix(care.k()),
        output_error_cov: matrix(care.output_error_cov()),
        residual: care.residual(),
        residual_bound: residual_bound(model, care.p()),
        closed_loop_eigenvalues: complex_list(&care.closed_loop_spectrum().sorted()),
    }
}

fn checks(common: &Common, extras: Extras) -> Result<Outcome, CliError> {
    let tol = common.output.tol;
    check_tolerance(tol)?;
    let quad_tol = quadrature_tolerance(tol);
    let (file, model) = input::load(&common.path)?;
    let care = solve_care(&model)?;
    let mut spectral = verify_integral_identity(&model, &care, quad_tol)?;
    let trace = spectral.trace_from_care;

    let mut verdict = vec![Check::new(
        "integral_trace",
        (trace - spectral.trace_from_integral).abs(),
        tol.max(tol * trace.abs()),
    )];
    if extras.zeros_poles {
        let zp = zeros_poles_form(&model, &care)?;
        verdict.push(Check::new(
            "zeros_poles_trace",
            (trace - zp.trace).abs(),
            tol * (1.0 + trace.abs()),
        ));
        spectral.attach_zeros_poles(zp);
    }
    if extras.bode {
        let bode = bode_sensitivity_integral(&model, &care, quad_tol)?;
        verdict.push(Check::new(
            "bode_integral",
            (bode.integral - bode.closed_form).abs(),
            tol,
        ));
        spectral.attach_bode(bode);
    }

    let bounds = trace_bounds(&model, &spectral);
    let trace_p = care.p().trace();
    let outside = (bounds.lower - trace_p)
        .max(trace_p - bounds.upper)
        .max(0.0);
    verdict.push(Check::new(
        "trace_bounds",
        outside,
        tol * trace_p.abs().max(1.0),
    ));

    let special_cases = if extras.special_cases {
        let cases = special_case_checks(&model, &care, tol, quad_tol)?;
        let entries = cases
            .into_iter()
            .map(|case| {
                let name = case.name.to_string();
                match case.status {
                    CaseStatus::Applied {
                        lhs,
                        rhs,
                        residual,
                        tolerance,
                    } => {
                        verdict.push(Check::new(
                            format!("special_case:{name}"),
                            residual,
                            tolerance,
                        ));
                        SpecialCaseEntry {
                            name,
                            applied: true,
                            lhs: Some(lhs),
                            rhs: Some(rhs),
                            residual: Some(residual),
                            tolerance: Some(tolerance),
                            reason: None,
                        }
                    }
                    CaseStatus::Skipped { reason } => SpecialCaseEntry {
                        name,
                        applied: false,
                        lhs: None,
                        rhs: None,
                        residual: None,
                        tolerance: None,
                        reason: Some(reason),
                    },
                }
            })
            .collect();
        Some(entries)
    } else {
        None
    };

    let samples = PopovEvaluator::new(&model)?
        .sample_logdet_ratio(FREQUENCY_SAMPLES)
        .into_iter()
        .map(|(w, v)| [w, v])
        .collect();
    let verdict = Verdict::new(tol, quad_tol, verdict);
    let status = if verdict.passed {
        ExitStatus::Pass
    } else {
        ExitStatus::IdentityFailure
    };
    let report = Report {
        schema_version: SCHEMA_VERSION.into(),
        model: Some(model_section(&file, &model)?),
        care: Some(care_section(&model, &care)),
        spectral: Some(SpectralSection {
            integral_term: spectral.integral_term,
            integral_error_estimate: spectral.integral_error_estimate,
            integral_evaluations: spectral.integral_evaluations,
            unstable_sum: spectral.unstable_sum,
            trace_from_care: spectral.trace_from_care,
            trace_from_integral: spectral.trace_from_integral,
            zeros_poles: spectral.zeros_poles.map(|zp| ZerosPolesSection {
                zeros: complex_list(&zp.zeros),
                poles: complex_list(&zp.poles),
                cancelled: zp.cancelled,
                zeros_term: zp.zeros_term,
                poles_term: zp.poles_term,
                unstable_sum: zp.unstable_sum,
                trace: zp.trace,
                boundary_zeros: complex_list(&zp.boundary_zeros),
            }),
            bode: spectral.bode.map(|b| BodeSection {
                integral: b.integral,
                error_estimate: b.error_estimate,
                closed_form: b.closed_form,
            }),
            residuals: spectral
                .residuals
                .into_iter()
                .map(|r| ResidualEntry {
                    name: r.name,
                    lhs: r.lhs,
                    rhs: r.rhs,
                    residual: r.residual,
                })
                .collect(),
            frequency_samples: samples,
        }),
        bounds: Some(BoundsSection {
            trace_p,
            lower: bounds.lower,
            upper: bounds.upper.is_finite().then_some(bounds.upper),
            lambda_min: bounds.lambda_min,
            lambda_max: bounds.lambda_max,
        }),
        special_cases,
        simulation: None,
        jensen: None,
        verdict,
    };
    Ok(Outcome { report, status })
}

fn jensen(
    numerator: &[f64],
    denominator: &[f64],
    mode: Mode,
    output: &OutputArgs,
) -> Result<Outcome, CliError> {
    let tol = output.tol;
    check_tolerance(tol)?;
    let quad_tol = quadrature_tolerance(tol);
    let f = RationalFunction::new(numerator, denominator)?;
    let (core_mode, name) = match mode {
        Mode::StablePoles => (JensenMode::StablePoles, "stable-poles"),
        Mode::General => (JensenMode::General, "general"),
    };
    let r = verify_jensen(&f, core_mode, quad_tol)?;
    let verdict = Verdict::new(tol, quad_tol, vec![Check::new("jensen", r.residual, tol)]);
    let status = if verdict.passed {
        ExitStatus::Pass
    } else {
        ExitStatus::IdentityFailure
    };
    let report = Report {
        schema_version: SCHEMA_VERSION.into(),
        model: None,
        care: None,
        spectral: None,
        bounds: None,
        special_cases: None,
        simulation: None,
        jensen: Some(JensenSection {
            numerator: f.numerator().to_vec(),
            denominator: f.denominator().to_vec(),
            mode: name.into(),
            zeros: complex_list(f.zeros()),
            poles: complex_list(f.poles()),
            integral_numeric: r.integral_numeric,
            integral_error_estimate: r.integral_error_estimate,
            limit_term: r.limit_term,
            zeros_term: r.zeros_term,
            poles_term: r.poles_term,
            closed_form: r.closed_form,
            residual: r.residual,
            warnings: r.warnings,
        }),
        verdict,
    };
    Ok(Outcome { report, status })
}

fn simulate(common: &Common, cfg: SimulationConfig) -> Result<Outcome, CliError> {
    let tol = common.output.tol;
    check_tolerance(tol)?;
    let (file, model) = input::load(&common.path)?;
    let care = solve_care(&model)?;
    let summary = run_monte_carlo(&model, &care, &cfg)?;
    let white = whiteness_check(&summary);
    let verdict = Verdict::new(
        tol,
        quadrature_tolerance(tol),
        vec![
            Check::new(
                "relative_gap_output",
                summary.relative_gap_output,
                SIMULATION_GAP_TOLERANCE,
            ),
            Check::new("whiteness", white.worst_value.abs(), white.threshold),
        ],
    );
    let status = if verdict.passed {
        ExitStatus::Pass
    } else {
        ExitStatus::SimulationFailure
    };
    let report = Report {
        schema_version: SCHEMA_VERSION.into(),
        model: Some(model_section(&file, &model)?),
        care: Some(care_section(&model, &care)),
        spectral: None,
        bounds: None,
        special_cases: None,
        simulation: Some(SimulationSection {
            dt: summary.dt,
            t_end: summary.t_end,
            burn_in: summary.burn_in,
            trials: summary.trials,
            steps: summary.steps,
            seed: cfg.seed,
            gain_mode: match cfg.gain_mode {
                GainMode::Steady => "steady".into(),
                GainMode::Transient => "transient".into(),
            },
            empirical_output_error_cov: matrix(&summary.empirical_output_error_cov),
            empirical_state_error_cov: matrix(&summary.empirical_state_error_cov),
            innovation_intensity: matrix(&summary.innovation_intensity),
            relative_gap_output: summary.relative_gap_output,
            relative_gap_state: summary.relative_gap_state,
            whiteness: WhitenessSection {
                passed: white.passed,
                threshold: white.threshold,
                worst_lag: white.worst_lag,
                worst_entry: [white.worst_entry.0, white.worst_entry.1],
                worst_value: white.worst_value,
            },
            innovation_autocorr: summary
                .innovation_autocorr
                .iter()
                .map(|(lag, rho)| LagEntry {
                    lag: *lag,
                    rho: matrix(rho),
                })
                .collect(),
        }),
        jensen: None,
        verdict,
    };
    Ok(Outcome { report, status })
}
