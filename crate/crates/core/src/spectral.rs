//! Frequency-domain characterizations of the steady-state filtering error.
//!
//! The Popov function `Φ_y(ω) = C(jωI−A)⁻¹W(−jωI−A)⁻ᵀCᵀ + V` is evaluated
//! pointwise and integrated as `(1/2π)∫ ln det(Φ_y V⁻¹) dω`, which together
//! with twice the sum of the unstable real parts of `A` equals
//! `tr(C P Cᵀ V⁻¹)`. The same trace is also rebuilt from the zeros and poles
//! of `det(Φ_y(s) V⁻¹)`, and the closed-loop sensitivity
//! `(I + C(sI−A)⁻¹K)⁻¹` obeys a Bode-type integral constraint.
//!
//! All integrals run over the half line (every integrand is even in `ω`)
//! under the substitution `ω = tan(πu/2)`. Integrands are arranged to keep
//! full relative precision in their `1/ω²` tails, since the substitution's
//! Jacobian multiplies any absolute error there by `ω²`.

use std::f64::consts::PI;

use nalgebra::Complex;
use thiserror::Error;

use crate::linalg::{
    eigenvalues, inverse_sqrt_spd, log_abs_det_identity_plus, logdet_identity_plus, solve_lyapunov,
    symmetric_eigenvalues, to_complex, ComplexMatrix, LinalgError, RealMatrix, Spectrum, C64,
    NORM_FLOOR,
};
use crate::model::SystemModel;
use crate::quadrature::{integrate_half_line, QuadratureError, QuadratureResult, Tolerance};
use crate::riccati::CareSolution;

/// Pairs of candidate zeros and poles closer than `1e-7·(1 + ‖A‖_F)` are
/// treated as cancelling.
pub const CANCELLATION_TOLERANCE: f64 = 1e-7;

/// Zeros with `|Re| < 1e-10·(1 + |z|)` are reported as touching the axis.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("j·{omega} is (numerically) an eigenvalue of A: distance {distance:.3e}")]
    PoleAtFrequency { omega: f64, distance: f64 },
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("inverse square root of V failed its check: defect {defect:.3e}")]
    InverseSqrt { defect: f64 },
}

fn j(omega: f64) -> C64 {
    Complex::new(0.0, omega)
}

/// Pointwise evaluator for `Φ_y(ω)` and related frequency responses.
#[derive(Debug, Clone)]
pub struct PopovEvaluator<'a> {
    model: &'a SystemModel,
    v_inv_sqrt: RealMatrix,
    a_complex: ComplexMatrix,
    spectrum: Spectrum,
}

impl<'a> PopovEvaluator<'a> {
    pub fn new(model: &'a SystemModel) -> Result<Self, SpectralError> {
        let v = model.v();
        let v_inv_sqrt = inverse_sqrt_spd(v)?;
        let l = v.nrows();
        let defect =
            (&v_inv_sqrt * v * &v_inv_sqrt - RealMatrix::identity(l, l)).norm() / (l as f64).sqrt();
        if defect > 1e-10 {
            return Err(SpectralError::InverseSqrt { defect });
        }
        Ok(Self {
            model,
            v_inv_sqrt,
            a_complex: to_complex(model.a()),
            spectrum: eigenvalues(model.a())?,
        })
    }

    pub fn model(&self) -> &SystemModel {
        self.model
    }

    /// Eigenvalues of `A`.
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Symmetric `V^{-1/2}`.
    pub fn v_inv_sqrt(&self) -> &RealMatrix {
        &self.v_inv_sqrt
    }

    fn check_off_spectrum(&self, omega: f64) -> Result<(), SpectralError> {
        let distance = self
            .spectrum
            .iter()
            .map(|lambda| (j(omega) - lambda).norm())
            .fold(f64::INFINITY, f64::min);
        if distance <= 1e-12 * (1.0 + self.model.a().norm()) {
            return Err(SpectralError::PoleAtFrequency { omega, distance });
        }
        Ok(())
    }

    /// `G(ω) = C(jωI − A)⁻¹`, l×m.
    fn output_resolvent(&self, omega: f64) -> Result<ComplexMatrix, SpectralError> {
        let m = self.model.state_dim();
        let mut shifted = -self.a_complex.transpose();
        for i in 0..m {
            shifted[(i, i)] += j(omega);
        }
        let rhs = to_complex(&self.model.c().transpose());
        let x = shifted
            .lu()
            .solve(&rhs)
            .filter(|x| x.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
            .ok_or(SpectralError::PoleAtFrequency {
                omega,
                distance: 0.0,
            })?;
        Ok(x.transpose())
    }

    /// `G W Gᴴ`, the part of `Φ_y` driven by process noise.
    fn process_part(&self, omega: f64) -> Result<ComplexMatrix, SpectralError> {
        let g = self.output_resolvent(omega)?;
        let gw = &g * to_complex(self.model.w());
        Ok(hermitian_part(&(gw * g.adjoint())))
    }

    /// `Φ_y(ω)`
    pub fn popov(&self, omega: f64) -> Result<ComplexMatrix, SpectralError> {
        self.check_off_spectrum(omega)?;
        Ok(self.process_part(omega)? + to_complex(self.model.v()))
    }

    /// `ln det(V^{-1/2} Φ_y(ω) V^{-1/2})`, which is `ln(det Φ_y / det V)`.
    pub fn logdet_ratio(&self, omega: f64) -> Result<f64, SpectralError> {
        self.check_off_spectrum(omega)?;
        self.logdet_ratio_unchecked(omega)
    }

    fn logdet_ratio_unchecked(&self, omega: f64) -> Result<f64, SpectralError> {
        let g = self.output_resolvent(omega)?;
        let b = to_complex(&self.v_inv_sqrt) * g;
        let m = hermitian_part(&(&b * to_complex(self.model.w()) * b.adjoint()));
        Ok(logdet_identity_plus(&m)?)
    }

    /// `L(ω) = C(jωI − A)⁻¹ K`
    pub fn loop_gain(&self, k: &RealMatrix, omega: f64) -> Result<ComplexMatrix, SpectralError> {
        self.check_off_spectrum(omega)?;
        Ok(self.output_resolvent(omega)? * to_complex(k))
    }

    /// Frequencies where the integrands may peak or be singular.
    fn breakpoints(&self, extra: &Spectrum) -> Vec<f64> {
        self.spectrum
            .iter()
            .chain(extra.iter())
            .flat_map(|z| [z.im.abs(), z.norm()])
            .collect()
    }

    /// `(1/2π)∫ ln det(Φ_y V⁻¹) dω` over the whole axis.
    pub fn frequency_integral(&self, tol: f64) -> Result<QuadratureResult, SpectralError> {
        let breaks = self.breakpoints(&Spectrum::default());
        axis_mean(|w| self.logdet_ratio_unchecked(w), &breaks, tol)
    }

    /// Log-spaced samples `(ω, ln det(Φ_y V⁻¹))` across the spectrum's scale,
    /// for plotting.
    pub fn sample_logdet_ratio(&self, count: usize) -> Vec<(f64, f64)> {
        let scale = self
            .spectrum
            .iter()
            .map(|z| z.norm())
            .fold(1.0_f64, f64::max);
        let (lo, hi) = ((1e-3 * scale).log10(), (1e3 * scale).log10());
        (0..count)
            .filter_map(|i| {
                let t = if count > 1 {
                    i as f64 / (count - 1) as f64
                } else {
                    0.0
                };
                let omega = 10f64.powf(lo + t * (hi - lo));
                self.logdet_ratio(omega).ok().map(|v| (omega, v))
            })
            .collect()
    }
}

fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * Complex::new(0.5, 0.0)
}

/// `(1/π)∫_0^∞ g`, which is `(1/2π)∫_{−∞}^{∞} g` for an even `g`.
fn axis_mean<G>(g: G, breaks: &[f64], tol: f64) -> Result<QuadratureResult, SpectralError>
where
    G: FnMut(f64) -> Result<f64, SpectralError>,
{
    let tolerance = Tolerance::relative(tol)?;
    let r = integrate_half_line(g, breaks, tolerance)?;
    Ok(QuadratureResult {
        value: r.value / PI,
        error: r.error / PI,
        ..r
    })
}

/// `Σ max(0, Re λ)`
pub fn unstable_sum(spectrum: &Spectrum) -> f64 {
    spectrum.unstable_sum()
}

/// `tr(C P Cᵀ V⁻¹)`
pub fn weighted_output_trace(model: &SystemModel, care: &CareSolution) -> f64 {
    (care.output_error_cov() * model.v_inverse()).trace()
}

/// Two quantities that an identity claims are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedResidual {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs|`
    pub residual: f64,
}

impl NamedResidual {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
        }
    }
}

/// Zeros and poles of `det(Φ_y(s) V⁻¹)` after cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct ZerosPoles {
    pub zeros: Vec<C64>,
    pub poles: Vec<C64>,
    /// Number of zero/pole pairs removed.
    pub cancelled: usize,
    pub zeros_term: f64,
    pub poles_term: f64,
    pub unstable_sum: f64,
    /// `zeros_term − poles_term + 2·unstable_sum`
    pub trace: f64,
    /// Surviving zeros within the axis tolerance; nonempty means the
    /// half-plane Jensen hypotheses are violated for this model.
    pub boundary_zeros: Vec<C64>,
}

/// Bode-type constraint on the filter's sensitivity function.
#[derive(Debug, Clone, PartialEq)]
pub struct BodeCheck {
    /// `(1/2π)∫ −ln|det(I + L(jω))| dω`
    pub integral: f64,
    pub error_estimate: f64,
    /// `−½ tr(CK) + Σ max(0, Re λ(A))`
    pub closed_form: f64,
}

/// Everything the frequency-domain routes say about the filtering error.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// `(1/2π)∫ ln det(Φ_y V⁻¹) dω`
    pub integral_term: f64,
    pub integral_error_estimate: f64,
    pub integral_evaluations: usize,
    pub unstable_sum: f64,
    /// `tr(C P Cᵀ V⁻¹)`
    pub trace_from_care: f64,
    /// `integral_term + 2·unstable_sum`
    pub trace_from_integral: f64,
    pub zeros_poles: Option<ZerosPoles>,
    pub bode: Option<BodeCheck>,
    pub residuals: Vec<NamedResidual>,
}

impl SpectralReport {
    pub fn attach_zeros_poles(&mut self, zp: ZerosPoles) {
        self.residuals.push(NamedResidual::new(
            "zeros_poles_trace",
            self.trace_from_care,
            zp.trace,
        ));
        self.zeros_poles = Some(zp);
    }

    pub fn attach_bode(&mut self, bode: BodeCheck) {
        self.residuals.push(NamedResidual::new(
            "bode_integral",
            bode.integral,
            bode.closed_form,
        ));
        self.bode = Some(bode);
    }

    pub fn residual(&self, name: &str) -> Option<&NamedResidual> {
        self.residuals.iter().find(|r| r.name == name)
    }
}

/// Computes `tr(C P Cᵀ V⁻¹)` from the Riccati solution and from the
/// frequency integral, and records their difference.
pub fn verify_integral_identity(
    model: &SystemModel,
    care: &CareSolution,
    tol: f64,
) -> Result<SpectralReport, SpectralError> {
    let ev = PopovEvaluator::new(model)?;
    let integral = ev.frequency_integral(tol)?;
    let unstable_sum = ev.spectrum().unstable_sum();
    let trace_from_care = weighted_output_trace(model, care);
    let trace_from_integral = integral.value + 2.0 * unstable_sum;
    Ok(SpectralReport {
        integral_term: integral.value,
        integral_error_estimate: integral.error,
        integral_evaluations: integral.evaluations,
        unstable_sum,
        trace_from_care,
        trace_from_integral,
        zeros_poles: None,
        bode: None,
        residuals: vec![NamedResidual::new(
            "integral_trace",
            trace_from_care,
            trace_from_integral,
        )],
    })
}

/// Removes zero/pole pairs closer than `tol`, closest pair first.
fn cancel_pairs(zeros: &mut Vec<C64>, poles: &mut Vec<C64>, tol: f64) -> usize {
    let mut cancelled = 0;
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, z) in zeros.iter().enumerate() {
            for (k, p) in poles.iter().enumerate() {
                let d = (z - p).norm();
                if d <= tol && best.is_none_or(|(_, _, b)| d < b) {
                    best = Some((i, k, d));
                }
            }
        }
        let Some((i, k, _)) = best else { break };
        zeros.remove(i);
        poles.remove(k);
        cancelled += 1;
    }
    cancelled
}

fn mirrored(spectrum: &Spectrum) -> Vec<C64> {
    spectrum
        .iter()
        .copied()
        .chain(spectrum.iter().map(|z| -z))
        .collect()
}

fn right_half_sum(values: &[C64]) -> f64 {
    values.iter().map(|z| z.re.max(0.0)).sum()
}

/// The trace rebuilt from the zeros and poles of `det(Φ_y(s) V⁻¹)`.
///
/// The spectral factorization `Φ_y(s) = S(s) V S(−s)ᵀ` with
/// `S(s) = I + C(sI−A)⁻¹K` gives
/// `det(Φ_y V⁻¹) = det(sI−(A−KC))·det(−sI−(A−KC)) / (det(sI−A)·det(−sI−A))`,
/// so the candidates are `±λ(A−KC)` and `±λ(A)`. The high-frequency limit
/// term vanishes because the determinant is even in `s`.
pub fn zeros_poles_form(
    model: &SystemModel,
    care: &CareSolution,
) -> Result<ZerosPoles, SpectralError> {
    let spectrum = eigenvalues(model.a())?;
    let mut zeros = mirrored(care.closed_loop_spectrum());
    let mut poles = mirrored(&spectrum);
    let tol = CANCELLATION_TOLERANCE * (1.0 + model.a().norm());
    let cancelled = cancel_pairs(&mut zeros, &mut poles, tol);
    let by_position = |x: &C64, y: &C64| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
    zeros.sort_by(by_position);
    poles.sort_by(by_position);
    let zeros_term = right_half_sum(&zeros);
    let poles_term = right_half_sum(&poles);
    let unstable_sum = spectrum.unstable_sum();
    let boundary_zeros = zeros
        .iter()
        .copied()
        .filter(|z| z.re.abs() < BOUNDARY_TOLERANCE * (1.0 + z.norm()))
        .collect();
    Ok(ZerosPoles {
        zeros,
        poles,
        cancelled,
        zeros_term,
        poles_term,
        unstable_sum,
        trace: zeros_term - poles_term + 2.0 * unstable_sum,
        boundary_zeros,
    })
}

/// Integral of the log-magnitude of the filter's sensitivity function,
/// against its closed form.
pub fn bode_sensitivity_integral(
    model: &SystemModel,
    care: &CareSolution,
    tol: f64,
) -> Result<BodeCheck, SpectralError> {
    let ev = PopovEvaluator::new(model)?;
    let k = to_complex(care.k());
    let breaks = ev.breakpoints(care.closed_loop_spectrum());
    let integral = axis_mean(
        |w| {
            let l = ev.output_resolvent(w)? * &k;
            Ok(-log_abs_det_identity_plus(&l)?)
        },
        &breaks,
        tol,
    )?;
    let closed_form = -0.5 * (model.c() * care.k()).trace() + ev.spectrum().unstable_sum();
    Ok(BodeCheck {
        integral: integral.value,
        error_estimate: integral.error,
        closed_form,
    })
}

/// Largest relative mismatch of `|det(I + L(jω))|²·det V = det Φ_y(ω)` over
/// the given frequencies.
pub fn factorization_residual(
    model: &SystemModel,
    care: &CareSolution,
    omegas: &[f64],
) -> Result<f64, SpectralError> {
    let ev = PopovEvaluator::new(model)?;
    let det_v = model.v().determinant();
    let mut worst: f64 = 0.0;
    for &w in omegas {
        let mut sens = ev.loop_gain(care.k(), w)?;
        for i in 0..sens.nrows() {
            sens[(i, i)] += Complex::new(1.0, 0.0);
        }
        let lhs = sens.determinant().norm_sqr() * det_v;
        let rhs = ev.popov(w)?.determinant().re;
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(NORM_FLOOR));
    }
    Ok(worst)
}

/// Bounds on `tr P` from the trace identity and the extreme eigenvalues of
/// `CᵀV⁻¹C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceBounds {
    pub lower: f64,
    /// `+∞` when `CᵀV⁻¹C` is singular.
    pub upper: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl TraceBounds {
    pub fn contains(&self, trace_p: f64, slack: f64) -> bool {
        self.lower <= trace_p + slack && trace_p <= self.upper + slack
    }
}

pub fn trace_bounds(model: &SystemModel, report: &SpectralReport) -> TraceBounds {
    let eig = symmetric_eigenvalues(&model.output_information());
    let lambda_min = eig[0];
    let lambda_max = eig[eig.len() - 1];
    let t = report.trace_from_integral;
    let lower = if lambda_max > 1e-12 {
        t / lambda_max
    } else {
        0.0
    };
    let upper = if lambda_min > 1e-12 {
        t / lambda_min
    } else {
        f64::INFINITY
    };
    TraceBounds {
        lower,
        upper,
        lambda_min,
        lambda_max,
    }
}

/// A reduced form of the trace identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialCase {
    pub name: &'static str,
    pub status: CaseStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseStatus {
    Applied {
        /// Riccati side
        lhs: f64,
        /// reduced formula
        rhs: f64,
        residual: f64,
        tolerance: f64,
    },
    Skipped {
        reason: String,
    },
}

impl SpecialCase {
    fn applied(name: &'static str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self {
            name,
            status: CaseStatus::Applied {
                lhs,
                rhs,
                residual: (lhs - rhs).abs(),
                tolerance,
            },
        }
    }

    fn skipped(name: &'static str, reason: impl Into<String>) -> Self {
        Self {
            name,
            status: CaseStatus::Skipped {
                reason: reason.into(),
            },
        }
    }

    /// `true` for skipped cases.
    pub fn passed(&self) -> bool {
        match self.status {
            CaseStatus::Applied {
                residual,
                tolerance,
                ..
            } => residual <= tolerance,
            CaseStatus::Skipped { .. } => true,
        }
    }

    pub fn is_applied(&self) -> bool {
        matches!(self.status, CaseStatus::Applied { .. })
    }
}

/// Stationary-covariance form of the output spectrum for Hurwitz `A`.
///
/// With `AΣ + ΣAᵀ + W = 0`, the state spectrum is `RΣ + ΣRᴴ` where
/// `R = (jωI−A)⁻¹ = −(A + jωI)(ω²I + A²)⁻¹`. Splitting `R` into real and
/// imaginary parts keeps everything in real arithmetic, so the `1/ω²` tail
/// carries no cancellation.
struct StationarySpectrum {
    a: RealMatrix,
    a_sq: RealMatrix,
    sigma: RealMatrix,
    c: RealMatrix,
}

impl StationarySpectrum {
    fn new(model: &SystemModel) -> Result<Self, SpectralError> {
        let a = model.a().clone();
        let sigma = solve_lyapunov(&a, model.w())?;
        Ok(Self {
            a_sq: &a * &a,
            a,
            sigma,
            c: model.c().clone(),
        })
    }

    /// `Φ_z(ω) = C(RΣ + ΣRᴴ)Cᵀ`
    fn eval(&self, omega: f64) -> Result<ComplexMatrix, SpectralError> {
        let m = self.a.nrows();
        let mut shifted = self.a_sq.clone();
        for i in 0..m {
            shifted[(i, i)] += omega * omega;
        }
        let n_sigma = shifted
            .lu()
            .solve(&self.sigma)
            .ok_or(SpectralError::PoleAtFrequency {
                omega,
                distance: 0.0,
            })?;
        let a_n_sigma = &self.a * &n_sigma;
        let re = -(&a_n_sigma + a_n_sigma.transpose());
        let im = (n_sigma.transpose() - &n_sigma) * omega;
        let ct = self.c.transpose();
        let re = &self.c * re * &ct;
        let im = &self.c * im * &ct;
        Ok(ComplexMatrix::from_fn(re.nrows(), re.ncols(), |r, c| {
            Complex::new(re[(r, c)], im[(r, c)])
        }))
    }
}

/// Evaluates each applicable reduced form of the trace identity on its own
/// route and compares it with the Riccati solution.
///
/// Integral forms are held to `max(tol, tol·|lhs|)` and computed with
/// quadrature tolerance `quad_tol`; the noiseless-plant form is held to
/// `1e-10·max(1, |lhs|)`.
pub fn special_case_checks(
    model: &SystemModel,
    care: &CareSolution,
    tol: f64,
    quad_tol: f64,
) -> Result<Vec<SpecialCase>, SpectralError> {
    let ev = PopovEvaluator::new(model)?;
    let spectrum = ev.spectrum().clone();
    let u = spectrum.unstable_sum();
    let hurwitz = spectrum.is_hurwitz();
    let l = model.output_dim();
    let m = model.state_dim();
    let integral_tol = |lhs: f64| tol.max(tol * lhs.abs());
    let breaks = ev.breakpoints(&Spectrum::default());
    let mut cases = Vec::new();

    // l = 1: CPCᵀ = σ²·(1/2π)∫ln(S_y/σ²) + 2σ²·U
    if l == 1 {
        let sigma2 = model.v()[(0, 0)];
        let w = to_complex(model.w());
        let s = axis_mean(
            |omega| {
                let g = ev.output_resolvent(omega)?;
                let s_y = (&g * &w * g.adjoint())[(0, 0)].re;
                Ok((s_y / sigma2).ln_1p())
            },
            &breaks,
            quad_tol,
        )?;
        let lhs = care.output_error_cov()[(0, 0)];
        let rhs = sigma2 * s.value + 2.0 * sigma2 * u;
        cases.push(SpecialCase::applied(
            "scalar_output",
            lhs,
            rhs,
            integral_tol(lhs),
        ));
    } else {
        cases.push(SpecialCase::skipped(
            "scalar_output",
            format!("{l} outputs"),
        ));
    }

    // l = 1, A Hurwitz: CPCᵀ = σ²·(1/2π)∫ln((S_z + σ²)/σ²)
    let stationary = if hurwitz {
        Some(StationarySpectrum::new(model)?)
    } else {
        None
    };
    match (&stationary, l) {
        (Some(st), 1) => {
            let sigma2 = model.v()[(0, 0)];
            let s = axis_mean(
                |omega| Ok((st.eval(omega)?[(0, 0)].re / sigma2).ln_1p()),
                &breaks,
                quad_tol,
            )?;
            let lhs = care.output_error_cov()[(0, 0)];
            cases.push(SpecialCase::applied(
                "stationary_scalar_output",
                lhs,
                sigma2 * s.value,
                integral_tol(lhs),
            ));
        }
        (None, _) => cases.push(SpecialCase::skipped(
            "stationary_scalar_output",
            "A is not Hurwitz",
        )),
        (Some(_), _) => cases.push(SpecialCase::skipped(
            "stationary_scalar_output",
            format!("{l} outputs"),
        )),
    }

    // A Hurwitz, any l: tr(CPCᵀV⁻¹) = (1/2π)∫ln det((Φ_z + V)V⁻¹)
    if let Some(st) = &stationary {
        let vis = to_complex(ev.v_inv_sqrt());
        let s = axis_mean(
            |omega| {
                let scaled = hermitian_part(&(&vis * st.eval(omega)? * &vis));
                Ok(logdet_identity_plus(&scaled)?)
            },
            &breaks,
            quad_tol,
        )?;
        let lhs = weighted_output_trace(model, care);
        cases.push(SpecialCase::applied(
            "stationary_outputs",
            lhs,
            s.value,
            integral_tol(lhs),
        ));
    } else {
        cases.push(SpecialCase::skipped(
            "stationary_outputs",
            "A is not Hurwitz",
        ));
    }

    // V = I: tr(CPCᵀ) = (1/2π)∫ln det Φ_y + 2U
    let identity_defect = (model.v() - RealMatrix::identity(l, l)).norm();
    if identity_defect <= 1e-12 {
        let s = axis_mean(
            |omega| Ok(logdet_identity_plus(&ev.process_part(omega)?)?),
            &breaks,
            quad_tol,
        )?;
        let lhs = care.output_error_cov().trace();
        cases.push(SpecialCase::applied(
            "unit_measurement_noise",
            lhs,
            s.value + 2.0 * u,
            integral_tol(lhs),
        ));
    } else {
        cases.push(SpecialCase::skipped(
            "unit_measurement_noise",
            format!("‖V − I‖_F = {identity_defect:.3e}"),
        ));
    }

    // W = 0: tr(CPCᵀV⁻¹) = 2U
    if model.w().norm() <= NORM_FLOOR {
        let lhs = weighted_output_trace(model, care);
        cases.push(SpecialCase::applied(
            "zero_process_noise",
            lhs,
            2.0 * u,
            1e-10 * lhs.abs().max(1.0),
        ));
    } else {
        cases.push(SpecialCase::skipped("zero_process_noise", "W ≠ 0"));
    }

    // l = m = 1: P = (1/C²){σv²·(1/2π)∫ln(C²σw²/(σv²|jω − A|²) + 1) + 2σv²·max(0, A)}
    if l == 1 && m == 1 {
        let (a, c) = (model.a()[(0, 0)], model.c()[(0, 0)]);
        let (sw2, sv2) = (model.w()[(0, 0)], model.v()[(0, 0)]);
        if c != 0.0 {
            let gain = c * c * sw2 / sv2;
            let s = axis_mean(
                |omega| Ok((gain / (omega * omega + a * a)).ln_1p()),
                &breaks,
                quad_tol,
            )?;
            let lhs = care.p()[(0, 0)];
            let rhs = (sv2 * s.value + 2.0 * sv2 * a.max(0.0)) / (c * c);
            cases.push(SpecialCase::applied(
                "scalar_system",
                lhs,
                rhs,
                integral_tol(lhs),
            ));
        } else {
            cases.push(SpecialCase::skipped("scalar_system", "C = 0"));
        }
    } else {
        cases.push(SpecialCase::skipped(
            "scalar_system",
            format!("{m} states, {l} outputs"),
        ));
    }

    Ok(cases)
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

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol
    }

    #[test]
    fn popov_scalar_values() {
        let model = scalar(0.0, 1.0, 1.0, 1.0);
        let ev = PopovEvaluator::new(&model).unwrap();
        assert!(close(ev.popov(1.0).unwrap()[(0, 0)].re, 2.0, 1e-15));
        assert!(close(ev.logdet_ratio(1.0).unwrap(), 2f64.ln(), 1e-15));

        let model = scalar(-1.0, 1.0, 3.0, 1.0);
        let ev = PopovEvaluator::new(&model).unwrap();
        assert!(close(ev.popov(0.0).unwrap()[(0, 0)].re, 4.0, 1e-15));
        assert!(close(ev.logdet_ratio(0.0).unwrap(), 4f64.ln(), 1e-15));
    }

    #[test]
    fn popov_rejects_frequency_on_spectrum() {
        let model = scalar(0.0, 1.0, 1.0, 1.0);
        let ev = PopovEvaluator::new(&model).unwrap();
        assert!(matches!(
            ev.popov(0.0),
            Err(SpectralError::PoleAtFrequency { .. })
        ));
        assert!(ev.logdet_ratio(0.0).is_err());
    }

    #[test]
    fn zero_process_noise_gives_v() {
        let a = RealMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, -2.0]);
        let c = RealMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let model = build_model(
            a,
            c,
            RealMatrix::zeros(2, 2),
            RealMatrix::from_element(1, 1, 2.0),
        )
        .unwrap();
        let ev = PopovEvaluator::new(&model).unwrap();
        for w in [0.1, 1.0, 7.0] {
            assert_eq!(ev.popov(w).unwrap()[(0, 0)].re, 2.0);
            assert_eq!(ev.logdet_ratio(w).unwrap(), 0.0);
        }
        assert_eq!(ev.frequency_integral(1e-10).unwrap().value, 0.0);
    }

    #[test]
    fn frequency_integral_scalar_examples() {
        for (a, expected) in [(0.0, 1.0), (-1.0, 1.0)] {
            let w = if a == 0.0 { 1.0 } else { 3.0 };
            let model = scalar(a, 1.0, w, 1.0);
            let ev = PopovEvaluator::new(&model).unwrap();
            let r = ev.frequency_integral(1e-11).unwrap();
            assert!(close(r.value, expected, 1e-9), "a = {a}: {}", r.value);
        }
    }

    #[test]
    fn unstable_sum_examples() {
        let s = Spectrum::new(vec![
            C64::new(1.0, 0.0),
            C64::new(-2.0, 0.0),
            C64::new(0.5, 1.0),
            C64::new(0.5, -1.0),
        ]);
        assert_eq!(unstable_sum(&s), 2.0);
        assert_eq!(unstable_sum(&Spectrum::new(vec![C64::new(-1.0, 0.0)])), 0.0);
        assert_eq!(unstable_sum(&Spectrum::new(vec![C64::new(0.0, 0.0)])), 0.0);
    }

    #[test]
    fn integral_identity_scalar_examples() {
        let model = scalar(1.0, 1.0, 0.0, 1.0);
        let care = solve_care(&model).unwrap();
        let r = verify_integral_identity(&model, &care, 1e-10).unwrap();
        assert!(close(r.trace_from_care, 2.0, 1e-10));
        assert_eq!(r.integral_term, 0.0);
        assert_eq!(r.unstable_sum, 1.0);
        assert!(r.residual("integral_trace").unwrap().residual <= 1e-8);
        assert_eq!(
            r.trace_from_integral,
            r.integral_term + 2.0 * r.unstable_sum
        );

        for (a, w) in [(0.0, 1.0), (-1.0, 3.0)] {
            let model = scalar(a, 1.0, w, 1.0);
            let care = solve_care(&model).unwrap();
            let r = verify_integral_identity(&model, &care, 1e-10).unwrap();
            assert!(close(r.trace_from_care, 1.0, 1e-10));
            assert!(r.residual("integral_trace").unwrap().residual <= 1e-8);
        }
    }

    #[test]
    fn zeros_poles_scalar_examples() {
        let zp = zeros_poles_form(
            &scalar(0.0, 1.0, 1.0, 1.0),
            &solve_care(&scalar(0.0, 1.0, 1.0, 1.0)).unwrap(),
        )
        .unwrap();
        assert_eq!(zp.cancelled, 0);
        assert!(close(zp.zeros_term, 1.0, 1e-12));
        assert!(close(zp.poles_term, 0.0, 1e-12));
        assert!(close(zp.trace, 1.0, 1e-12));

        let model = scalar(1.0, 1.0, 0.0, 1.0);
        let zp = zeros_poles_form(&model, &solve_care(&model).unwrap()).unwrap();
        assert_eq!(zp.cancelled, 2);
        assert!(zp.zeros.is_empty() && zp.poles.is_empty());
        assert!(close(zp.trace, 2.0, 1e-12));

        let model = scalar(-1.0, 1.0, 3.0, 1.0);
        let zp = zeros_poles_form(&model, &solve_care(&model).unwrap()).unwrap();
        assert_eq!(zp.cancelled, 0);
        assert!(close(zp.zeros_term, 2.0, 1e-12));
        assert!(close(zp.poles_term, 1.0, 1e-12));
        assert!(close(zp.trace, 1.0, 1e-12));
        assert!(zp.boundary_zeros.is_empty());
    }

    #[test]
    fn bode_scalar_examples() {
        let model = scalar(1.0, 1.0, 0.0, 1.0);
        let b = bode_sensitivity_integral(&model, &solve_care(&model).unwrap(), 1e-10).unwrap();
        assert!(close(b.closed_form, 0.0, 1e-12));
        assert!(close(b.integral, 0.0, 1e-10), "{}", b.integral);

        let model = scalar(-1.0, 1.0, 3.0, 1.0);
        let b = bode_sensitivity_integral(&model, &solve_care(&model).unwrap(), 1e-10).unwrap();
        assert!(close(b.closed_form, -0.5, 1e-12));
        assert!(close(b.integral, -0.5, 1e-9), "{}", b.integral);

        let model = scalar(-2.0, 1.0, 0.0, 1.0);
        let b = bode_sensitivity_integral(&model, &solve_care(&model).unwrap(), 1e-10).unwrap();
        assert_eq!(b.closed_form, 0.0);
        assert_eq!(b.integral, 0.0);
    }

    #[test]
    fn factorization_holds_on_scalar_model() {
        let model = scalar(-1.0, 1.0, 3.0, 1.0);
        let care = solve_care(&model).unwrap();
        let r = factorization_residual(&model, &care, &[0.0, 0.3, 1.0, 10.0]).unwrap();
        assert!(r <= 1e-12, "{r}");
    }

    #[test]
    fn bounds_examples() {
        let model = scalar(-1.0, 1.0, 3.0, 1.0);
        let care = solve_care(&model).unwrap();
        let r = verify_integral_identity(&model, &care, 1e-10).unwrap();
        let b = trace_bounds(&model, &r);
        assert_eq!(b.lower, r.trace_from_integral);
        assert_eq!(b.upper, r.trace_from_integral);

        let a = RealMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let c = RealMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let model =
            build_model(a, c, RealMatrix::identity(2, 2), RealMatrix::identity(1, 1)).unwrap();
        let care = solve_care(&model).unwrap();
        let r = verify_integral_identity(&model, &care, 1e-10).unwrap();
        let b = trace_bounds(&model, &r);
        assert_eq!(b.upper, f64::INFINITY);
        assert!(b.contains(care.p().trace(), 1e-9));
    }

    #[test]
    fn special_cases_on_stable_scalar_model() {
        let model = scalar(-1.0, 1.0, 3.0, 1.0);
        let care = solve_care(&model).unwrap();
        let cases = special_case_checks(&model, &care, 1e-6, 1e-10).unwrap();
        let applied: Vec<_> = cases
            .iter()
            .filter(|c| c.is_applied())
            .map(|c| c.name)
            .collect();
        assert_eq!(
            applied,
            [
                "scalar_output",
                "stationary_scalar_output",
                "stationary_outputs",
                "unit_measurement_noise",
                "scalar_system"
            ]
        );
        for case in &cases {
            assert!(case.passed(), "{case:?}");
        }
    }

    #[test]
    fn special_cases_skip_rather_than_pass_silently() {
        let model = scalar(1.0, 1.0, 0.0, 2.0);
        let care = solve_care(&model).unwrap();
        let cases = special_case_checks(&model, &care, 1e-6, 1e-10).unwrap();
        let find = |n: &str| cases.iter().find(|c| c.name == n).unwrap();
        assert!(!find("stationary_outputs").is_applied());
        assert!(!find("unit_measurement_noise").is_applied());
        let zero = find("zero_process_noise");
        assert!(zero.is_applied() && zero.passed(), "{zero:?}");
    }

    #[test]
    fn imaginary_axis_modes_are_integrable() {
        // undamped oscillator observed in position
        let a = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let c = RealMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let model =
            build_model(a, c, RealMatrix::identity(2, 2), RealMatrix::identity(1, 1)).unwrap();
        let care = solve_care(&model).unwrap();
        let r = verify_integral_identity(&model, &care, 1e-10).unwrap();
        let res = r.residual("integral_trace").unwrap();
        assert!(res.residual <= 1e-7, "{res:?}");
    }
}
