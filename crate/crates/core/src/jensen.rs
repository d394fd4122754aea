//! Half-plane Jensen formulas for real rational functions `f = p/q` with
//! `deg p = deg q` and `f(∞) = 1`:
//!
//! `(1/2π)∫ ln|f(jω)| dω = ½(p_{m−1}/p_m − q_{m−1}/q_m) + Σ max(0, Re φ) − Σ max(0, Re η)`
//!
//! over zeros `φ` and poles `η`. With only stable poles the last sum is
//! empty.

use nalgebra::Complex;
use thiserror::Error;

use crate::linalg::{eigenvalues, LinalgError, RealMatrix, C64};
use crate::quadrature::{integrate_half_line, QuadratureError, Tolerance};

/// Roots with `|Re r| < 1e-10·(1 + |r|)` count as lying on the axis.
pub const AXIS_TOLERANCE: f64 = 1e-10;
/// Roots of `p` and `q` closer than this are a cancellation.
pub const COMMON_ROOT_TOLERANCE: f64 = 1e-9;
/// Roots closer than this to the axis make the integral ill-conditioned.
pub const NEAR_AXIS_WARNING: f64 = 1e-8;
const STRIP_RELATIVE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JensenError {
    #[error("{0} has non-finite coefficients")]
    NonFinite(&'static str),
    #[error("{0} is the zero polynomial")]
    ZeroPolynomial(&'static str),
    #[error("numerator has degree {numerator} but denominator has degree {denominator}")]
    DegreeMismatch {
        numerator: usize,
        denominator: usize,
    },
    #[error("leading coefficients differ: {numerator} vs {denominator}")]
    LeadingMismatch { numerator: f64, denominator: f64 },
    #[error("{kind} {root} lies on the imaginary axis")]
    AxisRoot { kind: &'static str, root: String },
    #[error("numerator and denominator share the root {root}")]
    CommonRoot { root: String },
    #[error("pole {pole} is unstable; use the general (unstable-pole) mode")]
    UnstablePole { pole: String },
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn show(z: C64) -> String {
    crate::model::format_complex(z)
}

/// `f(s) = p(s)/q(s)`, coefficients in ascending powers of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    zeros: Vec<C64>,
    poles: Vec<C64>,
}

/// Drops leading coefficients that are negligible next to the largest one.
fn strip(coeffs: &[f64], name: &'static str) -> Result<Vec<f64>, JensenError> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(JensenError::NonFinite(name));
    }
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Err(JensenError::ZeroPolynomial(name));
    }
    let degree = coeffs
        .iter()
        .rposition(|c| c.abs() >= STRIP_RELATIVE * scale)
        .expect("some coefficient attains the scale");
    Ok(coeffs[..=degree].to_vec())
}

/// Roots as eigenvalues of the companion matrix.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<C64>, LinalgError> {
    let m = coeffs.len() - 1;
    if m == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[m];
    let mut companion = RealMatrix::zeros(m, m);
    for i in 1..m {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..m {
        companion[(i, m - 1)] = -coeffs[i] / lead;
    }
    Ok(eigenvalues(&companion)?.sorted())
}

/// Ascending real coefficients of `lead·Π(s − r)`; the roots must be closed
/// under conjugation.
pub fn polynomial_from_roots(lead: f64, roots: &[C64]) -> Vec<f64> {
    let mut c = vec![Complex::new(lead, 0.0)];
    for &r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * r;
        }
        c = next;
    }
    c.into_iter().map(|z| z.re).collect()
}

fn horner(coeffs: &[f64], s: C64) -> C64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
}

impl RationalFunction {
    pub fn new(numerator: &[f64], denominator: &[f64]) -> Result<Self, JensenError> {
        let numerator = strip(numerator, "numerator")?;
        let denominator = strip(denominator, "denominator")?;
        let (dp, dq) = (numerator.len() - 1, denominator.len() - 1);
        if dp != dq {
            return Err(JensenError::DegreeMismatch {
                numerator: dp,
                denominator: dq,
            });
        }
        let (pm, qm) = (numerator[dp], denominator[dq]);
        if (pm - qm).abs() > STRIP_RELATIVE * pm.abs().max(qm.abs()) {
            return Err(JensenError::LeadingMismatch {
                numerator: pm,
                denominator: qm,
            });
        }
        let zeros = polynomial_roots(&numerator)?;
        let poles = polynomial_roots(&denominator)?;
        for (kind, roots) in [("zero", &zeros), ("pole", &poles)] {
            if let Some(r) = roots
                .iter()
                .find(|r| r.re.abs() < AXIS_TOLERANCE * (1.0 + r.norm()))
            {
                return Err(JensenError::AxisRoot {
                    kind,
                    root: show(*r),
                });
            }
        }
        for z in &zeros {
            if poles
                .iter()
                .any(|p| (z - p).norm() <= COMMON_ROOT_TOLERANCE)
            {
                return Err(JensenError::CommonRoot { root: show(*z) });
            }
        }
        Ok(Self {
            numerator,
            denominator,
            zeros,
            poles,
        })
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn zeros(&self) -> &[C64] {
        &self.zeros
    }

    pub fn poles(&self) -> &[C64] {
        &self.poles
    }

    pub fn degree(&self) -> usize {
        self.numerator.len() - 1
    }

    pub fn eval(&self, s: C64) -> C64 {
        horner(&self.numerator, s) / horner(&self.denominator, s)
    }

    /// `ln|f(jω)|`, accurate to full relative precision as `f → 1`.
    ///
    /// Writes `f = 1 + r` with `r = (p − q)/q`; above `|ω| = 1` both
    /// polynomials are evaluated in `z = 1/s` so that `r` is never formed as
    /// a difference of large numbers.
    pub fn log_modulus_on_axis(&self, omega: f64) -> f64 {
        let diff: Vec<f64> = self
            .numerator
            .iter()
            .zip(&self.denominator)
            .map(|(p, q)| p - q)
            .collect();
        let r = if omega.abs() <= 1.0 {
            let s = Complex::new(0.0, omega);
            horner(&diff, s) / horner(&self.denominator, s)
        } else {
            let z = Complex::new(0.0, -1.0 / omega);
            let rev = |c: &[f64]| c.iter().rev().copied().collect::<Vec<_>>();
            horner(&rev(&diff), z) / horner(&rev(&self.denominator), z)
        };
        0.5 * (2.0 * r.re + r.norm_sqr()).ln_1p()
    }
}

/// `½(p_{m−1}/p_m − q_{m−1}/q_m)`, the high-frequency limit of `½σ ln|f(σ)|`.
pub fn limit_term(f: &RationalFunction) -> f64 {
    let m = f.degree();
    if m == 0 {
        return 0.0;
    }
    let (p, q) = (f.numerator(), f.denominator());
    0.5 * (p[m - 1] / p[m] - q[m - 1] / q[m])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JensenMode {
    /// All poles in the open left half-plane.
    StablePoles,
    /// Poles anywhere off the imaginary axis.
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub limit_term: f64,
    pub zeros_term: f64,
    pub poles_term: f64,
    /// `limit_term + zeros_term − poles_term`
    pub value: f64,
}

pub fn jensen_closed_form(
    f: &RationalFunction,
    mode: JensenMode,
) -> Result<ClosedForm, JensenError> {
    let limit = limit_term(f);
    let zeros_term = f.zeros().iter().map(|z| z.re.max(0.0)).sum::<f64>();
    let poles_term = match mode {
        JensenMode::StablePoles => {
            if let Some(p) = f.poles().iter().find(|p| p.re >= 0.0) {
                return Err(JensenError::UnstablePole { pole: show(*p) });
            }
            0.0
        }
        JensenMode::General => f.poles().iter().map(|p| p.re.max(0.0)).sum::<f64>(),
    };
    Ok(ClosedForm {
        limit_term: limit,
        zeros_term,
        poles_term,
        value: limit + zeros_term - poles_term,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericIntegral {
    pub value: f64,
    pub error_estimate: f64,
    /// Roots close enough to the axis to make the value unreliable.
    pub warnings: Vec<String>,
}

/// `(1/2π)∫ ln|f(jω)| dω` by adaptive quadrature on the half line.
pub fn jensen_numeric(f: &RationalFunction, tol: f64) -> Result<NumericIntegral, JensenError> {
    let tolerance = Tolerance::relative(tol)?;
    let roots = || f.zeros().iter().chain(f.poles());
    let warnings = roots()
        .filter(|r| r.re.abs() < NEAR_AXIS_WARNING)
        .map(|r| {
            format!(
                "root {} is within {NEAR_AXIS_WARNING:e} of the axis",
                show(*r)
            )
        })
        .collect();
    let breaks: Vec<f64> = roots().flat_map(|r| [r.im.abs(), r.norm()]).collect();
    let r = integrate_half_line::<_, JensenError>(
        |w| Ok(f.log_modulus_on_axis(w)),
        &breaks,
        tolerance,
    )?;
    Ok(NumericIntegral {
        value: r.value / std::f64::consts::PI,
        error_estimate: r.error / std::f64::consts::PI,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JensenResult {
    pub integral_numeric: f64,
    pub integral_error_estimate: f64,
    pub limit_term: f64,
    pub zeros_term: f64,
    pub poles_term: f64,
    pub closed_form: f64,
    /// `|integral_numeric − closed_form|`
    pub residual: f64,
    pub warnings: Vec<String>,
}

/// Evaluates both sides of the half-plane Jensen formula.
pub fn verify_jensen(
    f: &RationalFunction,
    mode: JensenMode,
    tol: f64,
) -> Result<JensenResult, JensenError> {
    let closed = jensen_closed_form(f, mode)?;
    let numeric = jensen_numeric(f, tol)?;
    Ok(JensenResult {
        integral_numeric: numeric.value,
        integral_error_estimate: numeric.error_estimate,
        limit_term: closed.limit_term,
        zeros_term: closed.zeros_term,
        poles_term: closed.poles_term,
        closed_form: closed.value,
        residual: (numeric.value - closed.value).abs(),
        warnings: numeric.warnings,
    })
}

/// The unstable-pole formula rebuilt from two stable-pole ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitForm {
    /// Ascending coefficients of the auxiliary denominator `l`.
    pub auxiliary: Vec<f64>,
    /// Stable-pole closed form for `p/l`.
    pub numerator_part: ClosedForm,
    /// Stable-pole closed form for `q/l`.
    pub denominator_part: ClosedForm,
    /// `numerator_part.value − denominator_part.value`
    pub value: f64,
}

/// Writes `f = (p/l)/(q/l)` with `l` of the same degree and leading
/// coefficient, all roots strictly stable, and no root shared with `p` or
/// `q`, then applies the stable-pole formula to each factor.
pub fn split_closed_form(f: &RationalFunction) -> Result<SplitForm, JensenError> {
    let m = f.degree();
    let lead = f.numerator()[m];
    let clashes = |r: C64| {
        f.zeros()
            .iter()
            .chain(f.poles())
            .any(|z| (z - r).norm() <= 1e3 * COMMON_ROOT_TOLERANCE)
    };
    let mut shift = 1.0;
    let roots = loop {
        let candidate: Vec<C64> = f
            .poles()
            .iter()
            .map(|p| Complex::new(-(p.re.abs() + shift), p.im))
            .collect();
        if !candidate.iter().any(|&r| clashes(r)) {
            break candidate;
        }
        shift += 0.371;
    };
    let auxiliary = polynomial_from_roots(lead, &roots);
    let numerator_part = jensen_closed_form(
        &RationalFunction::new(f.numerator(), &auxiliary)?,
        JensenMode::StablePoles,
    )?;
    let denominator_part = jensen_closed_form(
        &RationalFunction::new(f.denominator(), &auxiliary)?,
        JensenMode::StablePoles,
    )?;
    Ok(SplitForm {
        value: numerator_part.value - denominator_part.value,
        auxiliary,
        numerator_part,
        denominator_part,
    })
}
