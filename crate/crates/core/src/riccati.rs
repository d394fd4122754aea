//! Filter algebraic Riccati equation `AP + PAᵀ + W − PCᵀV⁻¹CP = 0`.
//!
//! The primary solver extracts the stable invariant subspace of the
//! Hamiltonian; Newton–Kleinman iteration is an independent route used to
//! cross-check it. The transient covariance `P(t)` is integrated with RK4.

use thiserror::Error;

use crate::linalg::{
    eigenvalues, ensure_finite, left_half_plane_subspace, solve_linear, solve_lyapunov,
    solve_lyapunov_unguarded, stable_invariant_subspace, symmetric_eigenvalues,
    symmetric_pseudo_inverse, symmetrize, LinalgError, RealMatrix, Spectrum, NORM_FLOOR,
};
use crate::model::SystemModel;

const NEWTON_MAX_ITERATIONS: usize = 200;
const NEWTON_TOLERANCE: f64 = 1e-12;
const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiccatiError {
    #[error("no stabilizing solution exists: {0}")]
    NoStabilizingSolution(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] LinalgError),
    #[error("Riccati solution is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("Riccati residual {residual:.3e} exceeds bound {bound:.3e}")]
    Residual { residual: f64, bound: f64 },
    #[error("initial gain is not stabilizing (spectral abscissa {abscissa:.3e})")]
    GainNotStabilizing { abscissa: f64 },
    #[error("Newton-Kleinman iteration stalled after {iterations} iterations (last change {last_change:.3e})")]
    NonConvergence { iterations: usize, last_change: f64 },
    #[error("Riccati ODE blew up at t = {time}")]
    BlowUp { time: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Stabilizing solution of the filter Riccati equation.
#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    p: RealMatrix,
    k: RealMatrix,
    closed_loop: RealMatrix,
    closed_loop_spectrum: Spectrum,
    residual: f64,
    output_error_cov: RealMatrix,
}

impl CareSolution {
    /// State estimation error covariance `P`.
    pub fn p(&self) -> &RealMatrix {
        &self.p
    }

    /// Steady-state gain `K = P Cᵀ V⁻¹`.
    pub fn k(&self) -> &RealMatrix {
        &self.k
    }

    /// `A − KC`
    pub fn closed_loop(&self) -> &RealMatrix {
        &self.closed_loop
    }

    pub fn closed_loop_spectrum(&self) -> &Spectrum {
        &self.closed_loop_spectrum
    }

    /// Frobenius norm of the Riccati left-hand side at `P`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `C P Cᵀ`
    pub fn output_error_cov(&self) -> &RealMatrix {
        &self.output_error_cov
    }

    /// Decay rate of the slowest closed-loop mode, `min |Re λ(A − KC)|`.
    pub fn slowest_decay(&self) -> f64 {
        self.closed_loop_spectrum
            .iter()
            .map(|z| z.re.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Hamiltonian `[[Aᵀ, −CᵀV⁻¹C], [−W, −A]]`.
pub fn hamiltonian(model: &SystemModel) -> RealMatrix {
    let m = model.state_dim();
    let mut h = RealMatrix::zeros(2 * m, 2 * m);
    h.view_mut((0, 0), (m, m)).copy_from(&model.a().transpose());
    h.view_mut((0, m), (m, m))
        .copy_from(&(model.output_information() * -1.0));
    h.view_mut((m, 0), (m, m)).copy_from(&(model.w() * -1.0));
    h.view_mut((m, m), (m, m)).copy_from(&(model.a() * -1.0));
    h
}

/// Left-hand side of the Riccati equation at `P`.
pub fn care_lhs(model: &SystemModel, p: &RealMatrix) -> RealMatrix {
    let a = model.a();
    a * p + p * a.transpose() + model.w() - p * model.output_information() * p
}

/// [`care_lhs`] with every sum carried in double-double arithmetic, so the
/// cancellation between `AP + PAᵀ + W` and `PSP` at large `‖P‖` leaves only
/// the final rounding.
pub fn care_lhs_accurate(model: &SystemModel, p: &RealMatrix) -> RealMatrix {
    let n = p.nrows();
    let (a, w) = (model.a(), model.w());
    let s = model.output_information();
    let sp: Vec<DoubleDouble> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            (0..n).fold(DoubleDouble::ZERO, |acc, k| {
                acc.add(DoubleDouble::product(s[(i, k)], p[(k, j)]))
            })
        })
        .collect();
    RealMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .fold(DoubleDouble::from(w[(i, j)]), |acc, k| {
                acc.add(DoubleDouble::product(a[(i, k)], p[(k, j)]))
                    .add(DoubleDouble::product(p[(i, k)], a[(j, k)]))
                    .add(sp[k + j * n].scale(-p[(i, k)]))
            })
            .value()
    })
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let hi = a + b;
        let b_virtual = hi - a;
        Self {
            hi,
            lo: (a - (hi - b_virtual)) + (b - b_virtual),
        }
    }

    fn product(a: f64, b: f64) -> Self {
        let hi = a * b;
        Self {
            hi,
            lo: a.mul_add(b, -hi),
        }
    }

    fn add(self, other: Self) -> Self {
        let s = Self::two_sum(self.hi, other.hi);
        Self::two_sum(s.hi, s.lo + self.lo + other.lo)
    }

    fn scale(self, b: f64) -> Self {
        let p = Self::product(self.hi, b);
        Self::two_sum(p.hi, p.lo + self.lo * b)
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Residual bound `1e-8·(1 + ‖A‖‖P‖ + ‖W‖ + ‖P‖²‖CᵀV⁻¹C‖)`.
pub fn residual_bound(model: &SystemModel, p: &RealMatrix) -> f64 {
    let pn = p.norm();
    1e-8 * (1.0
        + model.a().norm() * pn
        + model.w().norm()
        + pn * pn * model.output_information().norm())
}

/// Checks the invariants of a candidate `P` and assembles the solution.
fn finish(model: &SystemModel, p: RealMatrix) -> Result<CareSolution, RiccatiError> {
    let p = symmetrize(&p);
    ensure_finite(&p, "Riccati solution")?;
    let min_eigenvalue = symmetric_eigenvalues(&p)[0];
    if min_eigenvalue < -1e-9 * p.norm() {
        return Err(RiccatiError::NotPositiveSemidefinite { min_eigenvalue });
    }
    let k = &p * model.c().transpose() * model.v_inverse();
    let closed_loop = model.a() - &k * model.c();
    let closed_loop_spectrum = eigenvalues(&closed_loop)?;
    if !closed_loop_spectrum.is_hurwitz() {
        return Err(RiccatiError::NoStabilizingSolution(format!(
            "closed loop A - KC has spectral abscissa {:.3e}",
            closed_loop_spectrum.abscissa()
        )));
    }
    let residual = care_lhs(model, &p).norm();
    let bound = residual_bound(model, &p);
    if residual > bound {
        return Err(RiccatiError::Residual { residual, bound });
    }
    let output_error_cov = symmetrize(&(model.c() * &p * model.c().transpose()));
    Ok(CareSolution {
        p,
        k,
        closed_loop,
        closed_loop_spectrum,
        residual,
        output_error_cov,
    })
}

/// Stabilizing Riccati solution from the Hamiltonian's stable invariant
/// subspace `[X₁; X₂]`, `P = X₂ X₁⁻¹`.
pub fn solve_care(model: &SystemModel) -> Result<CareSolution, RiccatiError> {
    let m = model.state_dim();
    let h = hamiltonian(model);
    let basis = stable_invariant_subspace(&h).map_err(|e| match e {
        LinalgError::ImaginaryAxisEigenvalue { lambda } => RiccatiError::NoStabilizingSolution(
            format!("Hamiltonian eigenvalue {lambda} on the imaginary axis"),
        ),
        other => RiccatiError::Numerical(other),
    })?;
    let x1 = basis.rows(0, m).into_owned();
    let x2 = basis.rows(m, m).into_owned();
    // P X₁ = X₂  ⇔  X₁ᵀ Pᵀ = X₂ᵀ
    let pt = solve_linear(&x1.transpose(), &x2.transpose()).map_err(|e| match e {
        LinalgError::Singular { condition } => RiccatiError::NoStabilizingSolution(format!(
            "stable subspace is not a graph (X1 condition {condition:.3e})"
        )),
        other => RiccatiError::Numerical(other),
    })?;
    finish(model, refine(model, symmetrize(&pt.transpose())))
}

/// Newton corrections on a nearly converged `P`, kept while the accurately
/// evaluated residual keeps shrinking.
fn refine(model: &SystemModel, p: RealMatrix) -> RealMatrix {
    let mut best = p;
    let mut best_residual = care_lhs_accurate(model, &best);
    for _ in 0..REFINEMENT_STEPS {
        let k = &best * model.c().transpose() * model.v_inverse();
        let f = model.a() - &k * model.c();
        let Ok(x) = solve_lyapunov_unguarded(&f, &best_residual) else {
            break;
        };
        let candidate = symmetrize(&(&best + &x));
        let residual = care_lhs_accurate(model, &candidate);
        if residual.norm().partial_cmp(&best_residual.norm()) != Some(std::cmp::Ordering::Less) {
            break;
        }
        best = candidate;
        best_residual = residual;
    }
    best
}

/// Observer gain `K₀` with `A − K₀C` Hurwitz.
///
/// Only the unstable invariant subspace of `A` is moved, by a Bass gain on
/// the restricted pair; the stable modes keep their eigenvalues, which keeps
/// `K₀` small on weakly observed stable directions.
pub fn stabilizing_gain(model: &SystemModel) -> Result<RealMatrix, RiccatiError> {
    let m = model.state_dim();
    let a = model.a();
    let spectrum = eigenvalues(a)?;
    if spectrum.is_hurwitz() {
        return Ok(RealMatrix::zeros(m, model.output_dim()));
    }
    // only the modes that need moving get a gain: with K = Y G and Y spanning
    // the unstable invariant subspace, the stable modes stay where they are
    let shift = unstable_split(&spectrum, a.norm().max(1.0));
    let y = left_half_plane_subspace(&((a + RealMatrix::identity(m, m) * shift) * -1.0), None)?;
    let a_u = y.transpose() * a * &y;
    let c_u = model.c() * &y;
    let g = bass_gain(&a_u, &c_u, model.v_inverse())?;
    let k0 = &y * g;
    let abscissa = eigenvalues(&(a - &k0 * model.c()))?.abscissa();
    if abscissa >= 0.0 {
        return Err(RiccatiError::GainNotStabilizing { abscissa });
    }
    Ok(k0)
}

/// Shift `σ` such that `Re λ > −σ` selects every non-Hurwitz mode, kept
/// clear of all real parts so the split is well separated.
fn unstable_split(spectrum: &Spectrum, scale: f64) -> f64 {
    let mut parts: Vec<f64> = spectrum.iter().map(|z| z.re).collect();
    parts.sort_by(|x, y| y.total_cmp(x));
    let gap = 1e-6 * scale;
    let mut boundary = parts.iter().rposition(|&r| r >= 0.0).unwrap_or(0);
    while boundary + 1 < parts.len() && parts[boundary] - parts[boundary + 1] < gap {
        boundary += 1;
    }
    match parts.get(boundary + 1) {
        Some(&next) => -0.5 * (parts[boundary] + next),
        None => -parts[boundary] + 1.0,
    }
}

/// Bass gain for the pair `(A, C)`.
///
/// Solves `(A+βI)ᵀZ + Z(A+βI) = 2CᵀV⁻¹C` with `β > max(0, −min Re λ(A))`
/// and takes `K = Z⁺CᵀV⁻¹`; then `Z(A − KC) + (A − KC)ᵀZ = −2βZ` on the
/// observable part. The pseudo-inverse handles unobservable directions.
fn bass_gain(
    a: &RealMatrix,
    c: &RealMatrix,
    v_inverse: &RealMatrix,
) -> Result<RealMatrix, RiccatiError> {
    let m = a.nrows();
    let min_re = eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    let beta = (-min_re).max(0.0) + 1.0_f64.max(0.1 * a.norm());
    let shifted = a + RealMatrix::identity(m, m) * beta;
    let information = c.transpose() * v_inverse * c;
    // solve_lyapunov solves F X + X Fᵀ + Q = 0; here F = −(A+βI)ᵀ
    let z = solve_lyapunov(&(shifted.transpose() * -1.0), &(information * 2.0))?;
    let z_pinv = symmetric_pseudo_inverse(&z, 1e-12 * z.norm().max(NORM_FLOOR));
    Ok(z_pinv * c.transpose() * v_inverse)
}

/// Newton–Kleinman iteration from a stabilizing `K₀`, returning the
/// solution and the covariance iterates `P₀, P₁, …`.
pub fn newton_kleinman_iterates(
    model: &SystemModel,
    k0: &RealMatrix,
) -> Result<(CareSolution, Vec<RealMatrix>), RiccatiError> {
    let (m, l) = (model.state_dim(), model.output_dim());
    if k0.shape() != (m, l) {
        return Err(RiccatiError::InvalidArgument(format!(
            "initial gain must be {m}x{l}, got {}x{}",
            k0.nrows(),
            k0.ncols()
        )));
    }
    let abscissa = eigenvalues(&(model.a() - k0 * model.c()))?.abscissa();
    if abscissa >= 0.0 {
        return Err(RiccatiError::GainNotStabilizing { abscissa });
    }

    // first step in the classical form, then Newton corrections
    // F X + X Fᵀ + R(P) = 0 with R the Riccati left-hand side, so each
    // solve only has to resolve the shrinking update
    let f = model.a() - k0 * model.c();
    let q = model.w() + k0 * model.v() * k0.transpose();
    let mut p = solve_lyapunov_unguarded(&f, &q)?;
    let mut iterates = vec![p.clone()];
    let mut last_change = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let k = &p * model.c().transpose() * model.v_inverse();
        let f = model.a() - &k * model.c();
        let x = solve_lyapunov_unguarded(&f, &care_lhs_accurate(model, &p))?;
        p = symmetrize(&(&p + &x));
        iterates.push(p.clone());
        let change = x.norm();
        let scale = p.norm().max(NORM_FLOOR);
        let converged =
            change <= NEWTON_TOLERANCE * scale || (change <= 1e-9 * scale && change >= last_change);
        last_change = change;
        if converged {
            return Ok((finish(model, p)?, iterates));
        }
    }
    Err(RiccatiError::NonConvergence {
        iterations: NEWTON_MAX_ITERATIONS,
        last_change,
    })
}

/// Independent Riccati solution by Newton–Kleinman iteration.
pub fn newton_kleinman_oracle(
    model: &SystemModel,
    k0: &RealMatrix,
) -> Result<CareSolution, RiccatiError> {
    newton_kleinman_iterates(model, k0).map(|(solution, _)| solution)
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<'a> {
    /// Keep every `stride`-th step (the final state is always kept).
    pub stride: usize,
    /// Stationary solution to measure the terminal gap against.
    pub reference: Option<&'a CareSolution>,
}

impl Default for OdeOptions<'_> {
    fn default() -> Self {
        Self {
            stride: 1,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiTrajectory {
    pub times: Vec<f64>,
    pub covariances: Vec<RealMatrix>,
    /// `‖P(t_end) − P_∞‖_F / ‖P_∞‖_F` when a reference was supplied.
    pub terminal_gap: Option<f64>,
}

impl RiccatiTrajectory {
    pub fn terminal(&self) -> &RealMatrix {
        self.covariances.last().expect("trajectory is never empty")
    }
}

/// Right-hand side `AP + PAᵀ + W − P S P` of the covariance ODE.
pub(crate) struct RiccatiField {
    a: RealMatrix,
    at: RealMatrix,
    w: RealMatrix,
    s: RealMatrix,
}

impl RiccatiField {
    pub(crate) fn new(model: &SystemModel) -> Self {
        Self {
            a: model.a().clone(),
            at: model.a().transpose(),
            w: model.w().clone(),
            s: model.output_information(),
        }
    }

    fn eval(&self, p: &RealMatrix) -> RealMatrix {
        &self.a * p + p * &self.at + &self.w - p * &self.s * p
    }

    /// One classical RK4 step followed by symmetrization.
    pub(crate) fn rk4_step(&self, p: &RealMatrix, h: f64) -> RealMatrix {
        let k1 = self.eval(p);
        let k2 = self.eval(&(p + &k1 * (0.5 * h)));
        let k3 = self.eval(&(p + &k2 * (0.5 * h)));
        let k4 = self.eval(&(p + &k3 * h));
        symmetrize(&(p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)))
    }
}

/// Integrates `Ṗ = AP + PAᵀ + W − PCᵀV⁻¹CP` from `P(0) = P₀` to `t_end`
/// with classical RK4. The step is `t_end / ceil(t_end / dt)`, so it never
/// exceeds `dt`.
pub fn integrate_riccati_ode(
    model: &SystemModel,
    p0: &RealMatrix,
    t_end: f64,
    dt: f64,
    options: OdeOptions<'_>,
) -> Result<RiccatiTrajectory, RiccatiError> {
    let m = model.state_dim();
    if p0.shape() != (m, m) {
        return Err(RiccatiError::InvalidArgument(format!("P0 must be {m}x{m}")));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= dt && t_end.is_finite()) {
        return Err(RiccatiError::InvalidArgument(format!(
            "need dt > 0 and t_end >= dt, got dt = {dt}, t_end = {t_end}"
        )));
    }
    if options.stride == 0 {
        return Err(RiccatiError::InvalidArgument(
            "stride must be positive".into(),
        ));
    }
    ensure_finite(p0, "P0")?;
    let p0 = symmetrize(p0);
    let min_eigenvalue = symmetric_eigenvalues(&p0)[0];
    if min_eigenvalue < -1e-8 * p0.norm().max(NORM_FLOOR) {
        return Err(RiccatiError::NotPositiveSemidefinite { min_eigenvalue });
    }

    let field = RiccatiField::new(model);
    let steps = (t_end / dt).ceil() as usize;
    let h = t_end / steps as f64;
    let mut times = vec![0.0];
    let mut covariances = vec![p0.clone()];
    let mut p = p0;
    for step in 1..=steps {
        p = field.rk4_step(&p, h);
        let t = step as f64 * h;
        if !p.iter().all(|x| x.is_finite()) {
            return Err(RiccatiError::BlowUp { time: t });
        }
        if step % options.stride == 0 || step == steps {
            times.push(t);
            covariances.push(p.clone());
        }
    }
    let terminal_gap = options.reference.map(|care| {
        let target = care.p();
        let diff = (&p - target).norm();
        let scale = target.norm();
        if scale > NORM_FLOOR {
            diff / scale
        } else {
            diff
        }
    });
    Ok(RiccatiTrajectory {
        times,
        covariances,
        terminal_gap,
    })
}
