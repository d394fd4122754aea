//! Monte Carlo oracle for the steady-state filtering error.
//!
//! Each trial runs Euler–Maruyama on the plant and the filter jointly, but
//! in error coordinates `ε = x − x̄`:
//!
//! ```text
//! e_k     = C ε_k + ν_k                          ν_k ~ N(0, V/dt)
//! ε_{k+1} = ε_k + (A ε_k − K e_k) dt + w_k       w_k ~ N(0, W dt)
//! ```
//!
//! This is algebraically the same as stepping `x` and `x̄` separately, but
//! stays well scaled when `A` is unstable and `x` itself grows.
//!
//! Trial `i` draws from ChaCha8 stream `i` of the master seed, and trial
//! statistics are reduced in trial order, so results do not depend on how
//! rayon schedules the trials.

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{
    eigenvalues, ensure_finite, psd_factor, symmetric_eigenvalues, LinalgError, RealMatrix,
    NORM_FLOOR,
};
use crate::model::SystemModel;
use crate::riccati::{CareSolution, RiccatiField};

/// Innovation autocorrelations are estimated at lags `dt, 2dt, …, MAX_LAG·dt`.
pub const MAX_LAG: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("gain does not stabilize the filter: spectral abscissa of A - KC is {abscissa:.6e}")]
    UnstableFilter { abscissa: f64 },
    #[error("trial {trial} diverged at t = {time}")]
    BlowUp { trial: usize, time: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainMode {
    /// Constant gain from the algebraic Riccati equation.
    Steady,
    /// `K(t) = P(t)CᵀV⁻¹` with `P` integrated from `P(0) = Σ_x(0)`.
    Transient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Defaults to `10 / slowest closed-loop decay rate`, capped at `t_end/2`.
    pub burn_in: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Initial state covariance (the prior mean is zero); identity if absent.
    pub initial_state_cov: Option<RealMatrix>,
    pub gain_mode: GainMode,
    /// Replaces the steady gain, e.g. with a deliberately wrong one.
    pub gain_override: Option<RealMatrix>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 200.0,
            burn_in: None,
            trials: 2000,
            seed: 0,
            initial_state_cov: None,
            gain_mode: GainMode::Steady,
            gain_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub dt: f64,
    pub t_end: f64,
    pub burn_in: f64,
    pub trials: usize,
    /// Innovation samples recorded per trial.
    pub steps: usize,
    /// Second moment of `C ε` after burn-in (its mean is zero).
    pub empirical_output_error_cov: RealMatrix,
    /// Second moment of `ε` after burn-in.
    pub empirical_state_error_cov: RealMatrix,
    /// `dt` times the innovation sample covariance; tends to `V`.
    pub innovation_intensity: RealMatrix,
    /// `(lag, ρ)` with `ρ_ij = R_ij(lag) / √(R_ii(0) R_jj(0))`.
    pub innovation_autocorr: Vec<(f64, RealMatrix)>,
    /// `‖Σ_out − CPCᵀ‖_F / ‖CPCᵀ‖_F`
    pub relative_gap_output: f64,
    /// `‖Σ_state − P‖_F / ‖P‖_F`
    pub relative_gap_state: f64,
}

fn relative_gap(estimate: &RealMatrix, target: &RealMatrix) -> f64 {
    let diff = (estimate - target).norm();
    let scale = target.norm();
    if scale > NORM_FLOOR {
        diff / scale
    } else {
        diff
    }
}

/// Row-major copy of a matrix, for the allocation-free inner loop.
fn flat(m: &RealMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// `y += M x` for a row-major `rows × x.len()` matrix `M`.
#[inline]
fn mul_add(m: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &m[i * cols..(i + 1) * cols];
        *yi += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Gains indexed by step; the last entry is reused once the schedule ends.
struct GainSchedule {
    gains: Vec<Vec<f64>>,
}

impl GainSchedule {
    fn at(&self, step: usize) -> &[f64] {
        &self.gains[step.min(self.gains.len() - 1)]
    }
}

fn transient_schedule(
    model: &SystemModel,
    p0: &RealMatrix,
    dt: f64,
    steps: usize,
) -> Result<GainSchedule, SimulationError> {
    let field = RiccatiField::new(model);
    let ct_vinv = model.c().transpose() * model.v_inverse();
    let mut p = p0.clone();
    let mut gains = vec![flat(&(&p * &ct_vinv))];
    for step in 1..steps {
        let next = field.rk4_step(&p, dt);
        if !next.iter().all(|x| x.is_finite()) {
            return Err(SimulationError::BlowUp {
                trial: 0,
                time: step as f64 * dt,
            });
        }
        let settled = (&next - &p).norm() <= f64::EPSILON * p.norm().max(NORM_FLOOR);
        p = next;
        gains.push(flat(&(&p * &ct_vinv)));
        if settled {
            break;
        }
    }
    Ok(GainSchedule { gains })
}

struct Plan {
    m: usize,
    l: usize,
    dt: f64,
    steps: usize,
    burn_steps: usize,
    a: Vec<f64>,
    c: Vec<f64>,
    /// columns of a factor of `W dt`, row-major m × r
    w_factor: Vec<f64>,
    w_rank: usize,
    /// Cholesky factor of `V/dt`, row-major l × l
    v_factor: Vec<f64>,
    /// factor of `Σ_x(0)`, row-major m × m
    x0_factor: Vec<f64>,
    gains: GainSchedule,
}

#[derive(Clone)]
struct Moments {
    state: Vec<f64>,
    state_count: usize,
    /// `Σ e_n e_{n−k}ᵀ` for `k = 0..=MAX_LAG`, l × l row-major blocks
    lags: Vec<f64>,
    /// recorded innovations; lag `k` loses `k` products per trial
    recorded: usize,
    trials: usize,
}

impl Moments {
    fn new(m: usize, l: usize) -> Self {
        Self {
            state: vec![0.0; m * m],
            state_count: 0,
            lags: vec![0.0; (MAX_LAG + 1) * l * l],
            recorded: 0,
            trials: 1,
        }
    }

    fn lag_count(&self, k: usize) -> usize {
        self.recorded.saturating_sub(k * self.trials)
    }

    fn absorb(&mut self, other: &Moments) {
        for (x, y) in self.state.iter_mut().zip(&other.state) {
            *x += y;
        }
        self.state_count += other.state_count;
        for (x, y) in self.lags.iter_mut().zip(&other.lags) {
            *x += y;
        }
        self.recorded += other.recorded;
        self.trials += other.trials;
    }
}

impl Plan {
    fn run_trial(&self, trial: usize, seed: u64) -> Result<Moments, SimulationError> {
        let (m, l, dt) = (self.m, self.l, self.dt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut normal = move || -> f64 { rng.sample(StandardNormal) };

        let mut moments = Moments::new(m, l);
        let mut xi = vec![0.0; m.max(l)];
        let mut eps = vec![0.0; m];
        for v in xi.iter_mut().take(m) {
            *v = normal();
        }
        mul_add(&self.x0_factor, &xi[..m], &mut eps);

        // ring of the last MAX_LAG + 1 innovations, written twice so that
        // slots head..head + MAX_LAG + 1 run newest to oldest without wrapping
        const SLOTS: usize = MAX_LAG + 1;
        let mut history = vec![0.0; 2 * SLOTS * l];
        let mut head = 0usize;
        let mut e = vec![0.0; l];
        let mut drift = vec![0.0; m];
        for step in 0..self.steps {
            let record = step >= self.burn_steps;
            if record {
                for i in 0..m {
                    for j in 0..m {
                        moments.state[i * m + j] += eps[i] * eps[j];
                    }
                }
                moments.state_count += 1;
            }

            // innovation
            e.iter_mut().for_each(|x| *x = 0.0);
            mul_add(&self.c, &eps, &mut e);
            for v in xi.iter_mut().take(l) {
                *v = normal();
            }
            mul_add(&self.v_factor, &xi[..l], &mut e);

            if record {
                head = if head == 0 { SLOTS - 1 } else { head - 1 };
                history[head * l..(head + 1) * l].copy_from_slice(&e);
                history[(head + SLOTS) * l..(head + SLOTS + 1) * l].copy_from_slice(&e);
                // lags beyond the recorded count pair with zeros
                let window = &history[head * l..(head + SLOTS) * l];
                if l == 1 {
                    for (acc, past) in moments.lags.iter_mut().zip(window) {
                        *acc += e[0] * past;
                    }
                } else {
                    for (acc, past) in moments
                        .lags
                        .chunks_exact_mut(l * l)
                        .zip(window.chunks_exact(l))
                    {
                        for i in 0..l {
                            for j in 0..l {
                                acc[i * l + j] += e[i] * past[j];
                            }
                        }
                    }
                }
                moments.recorded += 1;
            }

            // ε ← ε + (Aε − K e) dt + w
            drift.iter_mut().for_each(|x| *x = 0.0);
            mul_add(&self.a, &eps, &mut drift);
            let k = self.gains.at(step);
            for (i, d) in drift.iter_mut().enumerate() {
                *d -= k[i * l..(i + 1) * l]
                    .iter()
                    .zip(&e)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
            for (x, d) in eps.iter_mut().zip(&drift) {
                *x += d * dt;
            }
            if self.w_rank > 0 {
                for v in xi.iter_mut().take(self.w_rank) {
                    *v = normal();
                }
                mul_add(&self.w_factor, &xi[..self.w_rank], &mut eps);
            }
            if !eps.iter().all(|x| x.is_finite()) {
                return Err(SimulationError::BlowUp {
                    trial,
                    time: (step + 1) as f64 * dt,
                });
            }
        }
        Ok(moments)
    }
}

fn validate(cfg: &SimulationConfig, m: usize) -> Result<(), SimulationError> {
    let bad = |msg: String| Err(SimulationError::Config(msg));
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return bad(format!("dt must be positive, got {}", cfg.dt));
    }
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        return bad(format!("t_end must be positive, got {}", cfg.t_end));
    }
    if cfg.trials == 0 {
        return bad("trials must be positive".into());
    }
    if let Some(b) = cfg.burn_in {
        if !(b >= 0.0 && b < cfg.t_end) {
            return bad(format!("burn-in {b} must lie in [0, t_end)"));
        }
    }
    if let Some(s0) = &cfg.initial_state_cov {
        if s0.shape() != (m, m) {
            return bad(format!("initial state covariance must be {m}x{m}"));
        }
        ensure_finite(s0, "initial state covariance")?;
        let min = symmetric_eigenvalues(s0)[0];
        if min < -1e-12 * s0.norm().max(NORM_FLOOR) {
            return bad(format!(
                "initial state covariance is not PSD (eigenvalue {min:.3e})"
            ));
        }
    }
    Ok(())
}

/// Estimates the steady-state error covariances and innovation
/// autocorrelations of the filter by simulation.
pub fn run_monte_carlo(
    model: &SystemModel,
    care: &CareSolution,
    cfg: &SimulationConfig,
) -> Result<SimulationSummary, SimulationError> {
    let (m, l) = (model.state_dim(), model.output_dim());
    validate(cfg, m)?;
    let burn_in = cfg
        .burn_in
        .unwrap_or_else(|| (10.0 / care.slowest_decay()).min(cfg.t_end / 2.0));
    if cfg.dt > (cfg.t_end - burn_in) / 100.0 {
        return Err(SimulationError::Config(format!(
            "dt = {} leaves fewer than 100 recorded steps after burn-in {burn_in}",
            cfg.dt
        )));
    }
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let burn_steps = ((burn_in / cfg.dt).ceil() as usize).min(steps);
    let x0_cov = cfg
        .initial_state_cov
        .clone()
        .unwrap_or_else(|| RealMatrix::identity(m, m));

    let gains = match cfg.gain_mode {
        GainMode::Steady => {
            let k = cfg
                .gain_override
                .clone()
                .unwrap_or_else(|| care.k().clone());
            if k.shape() != (m, l) {
                return Err(SimulationError::Config(format!("gain must be {m}x{l}")));
            }
            let abscissa = eigenvalues(&(model.a() - &k * model.c()))?.abscissa();
            if abscissa >= 0.0 {
                return Err(SimulationError::UnstableFilter { abscissa });
            }
            GainSchedule {
                gains: vec![flat(&k)],
            }
        }
        GainMode::Transient => {
            if cfg.gain_override.is_some() {
                return Err(SimulationError::Config(
                    "a gain override only applies to the steady gain mode".into(),
                ));
            }
            transient_schedule(model, &x0_cov, cfg.dt, steps)?
        }
    };

    let w_full = psd_factor(&(model.w() * cfg.dt));
    let keep: Vec<usize> = (0..m).filter(|&j| w_full.column(j).norm() > 0.0).collect();
    let w_factor = RealMatrix::from_fn(m, keep.len(), |i, j| w_full[(i, keep[j])]);
    let v_factor = Cholesky::new(model.v() / cfg.dt)
        .ok_or(LinalgError::NotPositiveDefinite {
            index: 0,
            pivot: f64::NAN,
        })?
        .l();
    let plan = Plan {
        m,
        l,
        dt: cfg.dt,
        steps,
        burn_steps,
        a: flat(model.a()),
        c: flat(model.c()),
        w_rank: keep.len(),
        w_factor: flat(&w_factor),
        v_factor: flat(&v_factor),
        x0_factor: flat(&psd_factor(&x0_cov)),
        gains,
    };

    let per_trial: Vec<Result<Moments, SimulationError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| plan.run_trial(t, cfg.seed))
        .collect();
    let mut total = Moments {
        trials: 0,
        ..Moments::new(m, l)
    };
    for r in &per_trial {
        total.absorb(r.as_ref().map_err(Clone::clone)?);
    }

    let state = RealMatrix::from_row_slice(m, m, &total.state) / total.state_count.max(1) as f64;
    let state = (&state + state.transpose()) * 0.5;
    let output = model.c() * &state * model.c().transpose();
    let output = (&output + output.transpose()) * 0.5;
    let lag_mean = |k: usize| {
        RealMatrix::from_row_slice(l, l, &total.lags[k * l * l..(k + 1) * l * l])
            / total.lag_count(k).max(1) as f64
    };
    let r0 = lag_mean(0);
    let innovation_autocorr = (1..=MAX_LAG)
        .map(|k| {
            let r = lag_mean(k);
            let rho = RealMatrix::from_fn(l, l, |i, j| {
                let scale = (r0[(i, i)] * r0[(j, j)]).sqrt();
                if scale > 0.0 {
                    r[(i, j)] / scale
                } else {
                    0.0
                }
            });
            (k as f64 * cfg.dt, rho)
        })
        .collect();

    Ok(SimulationSummary {
        dt: cfg.dt,
        t_end: cfg.t_end,
        burn_in,
        trials: cfg.trials,
        steps: steps - burn_steps,
        relative_gap_output: relative_gap(&output, care.output_error_cov()),
        relative_gap_state: relative_gap(&state, care.p()),
        empirical_output_error_cov: output,
        empirical_state_error_cov: state,
        innovation_intensity: (&r0 + r0.transpose()) * (0.5 * cfg.dt),
        innovation_autocorr,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhitenessReport {
    pub passed: bool,
    /// `4/√(trials·steps) + 0.02·dt`
    pub threshold: f64,
    pub worst_lag: f64,
    pub worst_entry: (usize, usize),
    pub worst_value: f64,
}

/// Checks that every normalized innovation autocorrelation at a nonzero lag
/// stays within sampling noise plus an `O(dt)` discretization allowance.
pub fn whiteness_check(summary: &SimulationSummary) -> WhitenessReport {
    let n = (summary.trials * summary.steps).max(1) as f64;
    let threshold = 4.0 / n.sqrt() + 0.02 * summary.dt;
    let mut worst = (0.0, (0, 0), 0.0_f64);
    for (lag, rho) in &summary.innovation_autocorr {
        for i in 0..rho.nrows() {
            for j in 0..rho.ncols() {
                if rho[(i, j)].abs() > worst.2.abs() {
                    worst = (*lag, (i, j), rho[(i, j)]);
                }
            }
        }
    }
    WhitenessReport {
        passed: worst.2.abs() <= threshold,
        threshold,
        worst_lag: worst.0,
        worst_entry: worst.1,
        worst_value: worst.2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;
    use crate::riccati::solve_care;

    fn scalar(a: f64, c: f64, w: f64, v: f64) -> SystemModel {
        let s = |x| RealMatrix::from_element(1, 1, x);
        build_model(s(a), s(c), s(w), s(v)).unwrap()
    }

    fn small(seed: u64) -> SimulationConfig {
        SimulationConfig {
            dt: 1e-2,
            t_end: 20.0,
            trials: 40,
            seed,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn noiseless_plant_has_zero_error() {
        let model = scalar(-1.0, 1.0, 0.0, 1e-8);
        let care = solve_care(&model).unwrap();
        let cfg = SimulationConfig {
            initial_state_cov: Some(RealMatrix::zeros(1, 1)),
            ..small(1)
        };
        let s = run_monte_carlo(&model, &care, &cfg).unwrap();
        assert!(s.empirical_state_error_cov[(0, 0)] < 1e-10);
        assert!(s.empirical_output_error_cov[(0, 0)] < 1e-10);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let model = scalar(-1.0, 1.0, 3.0, 1.0);
        let care = solve_care(&model).unwrap();
        let a = run_monte_carlo(&model, &care, &small(7)).unwrap();
        let b = run_monte_carlo(&model, &care, &small(7)).unwrap();
        assert_eq!(a, b);
        let c = run_monte_carlo(&model, &care, &small(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn roughly_reproduces_riccati_covariance() {
        let model = scalar(-1.0, 1.0, 3.0, 1.0);
        let care = solve_care(&model).unwrap();
        let s = run_monte_carlo(&model, &care, &small(3)).unwrap();
        assert!(s.relative_gap_output < 0.15, "{}", s.relative_gap_output);
        assert!((s.innovation_intensity[(0, 0)] - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejects_unstable_override() {
        let model = scalar(1.0, 1.0, 1.0, 1.0);
        let care = solve_care(&model).unwrap();
        let cfg = SimulationConfig {
            gain_override: Some(RealMatrix::from_element(1, 1, 0.5)),
            ..small(0)
        };
        assert!(matches!(
            run_monte_carlo(&model, &care, &cfg),
            Err(SimulationError::UnstableFilter { .. })
        ));
    }

    #[test]
    fn explicit_scheme_instability_is_reported() {
        let model = scalar(-1000.0, 1.0, 1.0, 1.0);
        let care = solve_care(&model).unwrap();
        let cfg = SimulationConfig {
            dt: 0.01,
            t_end: 50.0,
            burn_in: Some(0.0),
            trials: 2,
            ..SimulationConfig::default()
        };
        match run_monte_carlo(&model, &care, &cfg) {
            Err(SimulationError::BlowUp { trial, time }) => {
                assert_eq!(trial, 0);
                assert!(time > 0.0 && time < 50.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let model = scalar(-1.0, 1.0, 3.0, 1.0);
        let care = solve_care(&model).unwrap();
        for cfg in [
            SimulationConfig {
                dt: 0.0,
                ..small(0)
            },
            SimulationConfig {
                trials: 0,
                ..small(0)
            },
            SimulationConfig {
                burn_in: Some(30.0),
                ..small(0)
            },
            SimulationConfig {
                dt: 1.0,
                ..small(0)
            },
            SimulationConfig {
                initial_state_cov: Some(RealMatrix::from_element(1, 1, -1.0)),
                ..small(0)
            },
        ] {
            assert!(matches!(
                run_monte_carlo(&model, &care, &cfg),
                Err(SimulationError::Config(_))
            ));
        }
    }

    #[test]
    fn zero_innovations_are_white() {
        let s = SimulationSummary {
            dt: 0.1,
            t_end: 1.0,
            burn_in: 0.0,
            trials: 1,
            steps: 10,
            empirical_output_error_cov: RealMatrix::zeros(1, 1),
            empirical_state_error_cov: RealMatrix::zeros(1, 1),
            innovation_intensity: RealMatrix::zeros(1, 1),
            innovation_autocorr: vec![(0.1, RealMatrix::zeros(1, 1))],
            relative_gap_output: 0.0,
            relative_gap_state: 0.0,
        };
        assert!(whiteness_check(&s).passed);
    }

    #[test]
    fn transient_schedule_settles_to_steady_gain() {
        let model = scalar(-1.0, 1.0, 3.0, 1.0);
        let care = solve_care(&model).unwrap();
        let sched = transient_schedule(&model, &RealMatrix::from_element(1, 1, 5.0), 0.01, 100_000)
            .unwrap();
        let last = sched.at(usize::MAX)[0];
        assert!((last - care.k()[(0, 0)]).abs() < 1e-12);
        assert!(sched.gains.len() < 100_000);
    }
}
