//! Dense real/complex linear-algebra kernel.
//!
//! Eigenvalues, Schur factorizations and singular values are delegated to
//! `nalgebra`; this module wraps them behind residual-checked contracts and
//! adds the pieces the rest of the crate needs: log-determinants by
//! triangular factorization, the matrix sign function, stable invariant
//! subspaces, guarded linear solves and Lyapunov solves.
//!
//! All tolerances are relative to Frobenius norms, with an absolute floor of
//! [`NORM_FLOOR`] for zero matrices.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

pub type C64 = Complex<f64>;
pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<C64>;

/// Absolute floor applied to norms in relative tolerances.
pub const NORM_FLOOR: f64 = 1e-14;

const SIGN_MAX_ITERATIONS: usize = 100;
const SIGN_TOLERANCE: f64 = 1e-12;
const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("eigenvalue iteration did not converge (matrix norm {norm:.3e})")]
    NoConvergence { norm: f64 },
    #[error(
        "eigenvalue {lambda} fails the residual check: smallest singular value {residual:.3e}"
    )]
    EigenResidual { lambda: C64, residual: f64 },
    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("matrix is not positive definite (pivot {index} is {pivot:.3e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("no stabilizing solution: eigenvalue {lambda} lies on the imaginary axis")]
    ImaginaryAxisEigenvalue { lambda: C64 },
    #[error("expected {expected} stable eigenvalues, found {found}")]
    StableCount { expected: usize, found: usize },
    #[error("matrix sign iteration did not converge in {iterations} iterations")]
    SignIteration { iterations: usize },
    #[error("invariant subspace residual {residual:.3e} exceeds {bound:.3e}")]
    SubspaceResidual { residual: f64, bound: f64 },
    #[error("singular or ill-conditioned system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("linear solve residual {residual:.3e} exceeds {bound:.3e}")]
    SolveResidual { residual: f64, bound: f64 },
}

/// Eigenvalues of a real matrix, with multiplicity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Spectrum(Vec<C64>);

impl Spectrum {
    pub fn new(values: Vec<C64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &C64> {
        self.0.iter()
    }

    /// Largest real part (spectral abscissa); `-inf` when empty.
    pub fn abscissa(&self) -> f64 {
        self.0
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_hurwitz(&self) -> bool {
        self.0.iter().all(|z| z.re < 0.0)
    }

    /// Sum of `max(0, Re λ)` over the spectrum.
    pub fn unstable_sum(&self) -> f64 {
        self.0.iter().map(|z| z.re.max(0.0)).sum()
    }

    /// Spectrum sorted by real part, then imaginary part.
    pub fn sorted(&self) -> Vec<C64> {
        let mut v = self.0.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }
}

pub fn ensure_finite(m: &RealMatrix, name: &'static str) -> Result<(), LinalgError> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite(name))
    }
}

fn ensure_square(rows: usize, cols: usize, what: &str) -> Result<(), LinalgError> {
    if rows != cols {
        return Err(LinalgError::Dimension(format!(
            "{what} must be square, got {rows}x{cols}"
        )));
    }
    Ok(())
}

pub fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub fn symmetrize(m: &RealMatrix) -> RealMatrix {
    (m + m.transpose()) * 0.5
}

/// `‖M − Mᵀ‖_F / ‖M‖_F`, zero for the zero matrix.
pub fn symmetry_defect(m: &RealMatrix) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &RealMatrix) -> DVector<f64> {
    let mut values = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    values.as_mut_slice().sort_by(f64::total_cmp);
    values
}

/// Factor `S` with `S Sᵀ = M` for a symmetric PSD `M`; negative eigenvalues
/// from roundoff are clamped to zero.
pub fn psd_factor(m: &RealMatrix) -> RealMatrix {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut s = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let root = lambda.max(0.0).sqrt();
        s.column_mut(j).scale_mut(root);
    }
    s
}

/// Symmetric inverse square root of a symmetric positive definite matrix.
pub fn inverse_sqrt_spd(m: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut scaled = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        if *lambda <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite {
                index: j,
                pivot: *lambda,
            });
        }
        scaled.column_mut(j).scale_mut(lambda.sqrt().recip());
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}

/// Singular value decomposition `M = U Σ Vᴴ` by one-sided (Hestenes)
/// Jacobi rotations.
///
/// `u` is r×k and `v` is c×k with `k = min(r, c)`; singular values are in
/// descending order. Columns of `u` belonging to zero singular values are
/// zero. One-sided Jacobi computes even tiny singular values to high
/// relative accuracy.
#[derive(Debug, Clone)]
pub struct JacobiSvd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 80;

pub fn jacobi_svd(m: &ComplexMatrix) -> Result<JacobiSvd, LinalgError> {
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(LinalgError::NonFinite("SVD input"));
    }
    if m.nrows() < m.ncols() {
        let t = jacobi_svd(&m.adjoint())?;
        return Ok(JacobiSvd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(n, n);
    let tol = f64::EPSILON * (n.max(1) as f64);
    // columns below this squared norm are rounding noise
    let negligible = (tol * m.norm()).powi(2);
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        converged = true;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                converged = false;
                // rotate the phase out of γ, then apply a real rotation
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = (1.0 + t * t).sqrt().recip();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase.conj();
                        mat[(i, p)] = xp * c - xq * s;
                        mat[(i, q)] = xp * s + xq * c;
                    }
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence { norm: m.norm() });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut u = ComplexMatrix::zeros(m.nrows(), n);
    let mut vs = ComplexMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        if sigma > 0.0 {
            u.set_column(k, &(a.column(j) / Complex::new(sigma, 0.0)));
        }
        vs.set_column(k, &v.column(j));
        singular_values.push(sigma);
    }
    Ok(JacobiSvd {
        u,
        singular_values,
        v: vs,
    })
}

/// Smallest singular value of a complex matrix (zero for an empty one).
pub fn min_singular_value(m: &ComplexMatrix) -> Result<f64, LinalgError> {
    Ok(jacobi_svd(m)?
        .singular_values
        .last()
        .copied()
        .unwrap_or(0.0))
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix; eigenvalues with
/// magnitude at most `cutoff` are treated as zero.
pub fn symmetric_pseudo_inverse(m: &RealMatrix, cutoff: f64) -> RealMatrix {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut scaled = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let inv = if lambda.abs() > cutoff {
            lambda.recip()
        } else {
            0.0
        };
        scaled.column_mut(j).scale_mut(inv);
    }
    symmetrize(&(&scaled * eig.eigenvectors.transpose()))
}

/// All eigenvalues of a real square matrix.
///
/// Every returned `λ` satisfies `σ_min(M − λI) ≤ 1e-8·(1 + ‖M‖_F)`. Complex
/// eigenvalues come out of the real Schur form's 2×2 blocks, so they appear
/// as exact conjugate pairs.
pub fn eigenvalues(m: &RealMatrix) -> Result<Spectrum, LinalgError> {
    ensure_square(m.nrows(), m.ncols(), "eigenvalue input")?;
    ensure_finite(m, "eigenvalue input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Spectrum::default());
    }
    let norm = m.norm();
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, 1000 * n.max(10))
        .ok_or(LinalgError::NoConvergence { norm })?;
    let values: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();

    let bound = 1e-8 * (1.0 + norm);
    let mc = to_complex(m);
    for &lambda in &values {
        let mut shifted = mc.clone();
        for i in 0..n {
            shifted[(i, i)] -= lambda;
        }
        let residual = min_singular_value(&shifted)?;
        if residual > bound {
            return Err(LinalgError::EigenResidual { lambda, residual });
        }
    }
    Ok(Spectrum::new(values))
}

/// Natural log of the determinant of a Hermitian positive definite matrix,
/// as the sum of logs of the `LDLᴴ` pivots.
pub fn hermitian_logdet(m: &ComplexMatrix) -> Result<f64, LinalgError> {
    check_hermitian(m)?;
    ldl_log_pivots(m, false)
}

/// `ln det(I + M)` for Hermitian `M` with `I + M` positive definite.
///
/// The pivots are carried as their excess over one, so the result keeps full
/// relative precision when `M` is tiny (high-frequency tails of spectra).
pub fn logdet_identity_plus(m: &ComplexMatrix) -> Result<f64, LinalgError> {
    check_hermitian(m)?;
    ldl_log_pivots(m, true)
}

fn check_hermitian(m: &ComplexMatrix) -> Result<(), LinalgError> {
    ensure_square(m.nrows(), m.ncols(), "Hermitian input")?;
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(LinalgError::NonFinite("Hermitian input"));
    }
    let norm = m.norm().max(NORM_FLOOR);
    let defect = (m - m.adjoint()).norm() / norm;
    if defect > 1e-10 {
        return Err(LinalgError::NotHermitian { defect });
    }
    Ok(())
}

fn ldl_log_pivots(m: &ComplexMatrix, unit_shift: bool) -> Result<f64, LinalgError> {
    let n = m.nrows();
    let shift = if unit_shift { 1.0 } else { 0.0 };
    let mut l = ComplexMatrix::zeros(n, n);
    let mut d = vec![0.0; n];
    let mut logdet = 0.0;
    for k in 0..n {
        let mut excess = m[(k, k)].re;
        for j in 0..k {
            excess -= l[(k, j)].norm_sqr() * d[j];
        }
        let pivot = shift + excess;
        if pivot.is_nan() || pivot <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { index: k, pivot });
        }
        d[k] = pivot;
        logdet += if unit_shift {
            excess.ln_1p()
        } else {
            pivot.ln()
        };
        for i in (k + 1)..n {
            // average the two triangles so tiny Hermitian defects cancel
            let mut s = (m[(i, k)] + m[(k, i)].conj()) * 0.5;
            for j in 0..k {
                s -= l[(i, j)] * l[(k, j)].conj() * d[j];
            }
            l[(i, k)] = s / pivot;
        }
    }
    Ok(logdet)
}

/// `ln |det(I + L)|` for a general complex square `L`.
///
/// Small `L` goes through an unpivoted elimination that tracks each pivot's
/// excess over one; larger `L` uses partial-pivoted LU.
pub fn log_abs_det_identity_plus(l: &ComplexMatrix) -> Result<f64, LinalgError> {
    ensure_square(l.nrows(), l.ncols(), "determinant input")?;
    let n = l.nrows();
    if l.norm() < 0.5 {
        let mut a = l.clone();
        let mut acc = 0.0;
        for k in 0..n {
            let excess = a[(k, k)];
            let pivot = C64::new(1.0, 0.0) + excess;
            acc += 0.5 * (2.0 * excess.re + excess.norm_sqr()).ln_1p();
            for i in (k + 1)..n {
                let factor = a[(i, k)] / pivot;
                for j in (k + 1)..n {
                    let update = factor * a[(k, j)];
                    a[(i, j)] -= update;
                }
            }
        }
        return Ok(acc);
    }
    let mut shifted = l.clone();
    for i in 0..n {
        shifted[(i, i)] += C64::new(1.0, 0.0);
    }
    let lu = shifted.lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..n {
        let modulus = u[(i, i)].norm();
        if modulus == 0.0 {
            return Err(LinalgError::Singular {
                condition: f64::INFINITY,
            });
        }
        acc += modulus.ln();
    }
    Ok(acc)
}

/// Solve `A X = B` by partial-pivoted LU.
///
/// Rejects systems whose 1-norm condition estimate reaches `1e12`, and
/// verifies `‖AX − B‖_F ≤ 1e-10·‖A‖_F·‖X‖_F`.
pub fn solve_linear(a: &RealMatrix, b: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    solve_linear_limited(a, b, CONDITION_LIMIT)
}

fn solve_linear_limited(
    a: &RealMatrix,
    b: &RealMatrix,
    condition_limit: f64,
) -> Result<RealMatrix, LinalgError> {
    ensure_square(a.nrows(), a.ncols(), "coefficient matrix")?;
    if b.nrows() != a.nrows() {
        return Err(LinalgError::Dimension(format!(
            "right-hand side has {} rows, expected {}",
            b.nrows(),
            a.nrows()
        )));
    }
    ensure_finite(a, "coefficient matrix")?;
    ensure_finite(b, "right-hand side")?;
    let lu = a.clone().lu();
    let inverse = lu.try_inverse().ok_or(LinalgError::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(a) * one_norm(&inverse);
    if !condition.is_finite() || condition >= condition_limit {
        return Err(LinalgError::Singular { condition });
    }
    let x = lu.solve(b).ok_or(LinalgError::Singular { condition })?;
    let residual = (a * &x - b).norm();
    let bound = (1e-10 * a.norm() * x.norm()).max(NORM_FLOOR);
    if residual > bound {
        return Err(LinalgError::SolveResidual { residual, bound });
    }
    Ok(x)
}

fn one_norm(m: &RealMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solve `F X + X Fᵀ + Q = 0` through the vectorized `m²×m²` system.
pub fn solve_lyapunov(f: &RealMatrix, q: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    lyapunov_kronecker(f, q, CONDITION_LIMIT)
}

/// [`solve_lyapunov`] without the conditioning guard, for callers that
/// correct the result afterwards (a Newton step on a small correction).
/// The backward residual is still checked.
pub fn solve_lyapunov_unguarded(f: &RealMatrix, q: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    lyapunov_kronecker(f, q, f64::INFINITY)
}

fn lyapunov_kronecker(
    f: &RealMatrix,
    q: &RealMatrix,
    condition_limit: f64,
) -> Result<RealMatrix, LinalgError> {
    ensure_square(f.nrows(), f.ncols(), "Lyapunov operator")?;
    let n = f.nrows();
    if q.shape() != (n, n) {
        return Err(LinalgError::Dimension(format!(
            "Lyapunov right-hand side must be {n}x{n}"
        )));
    }
    let identity = RealMatrix::identity(n, n);
    let operator = identity.kronecker(f) + f.kronecker(&identity);
    // nalgebra storage is column-major, which is exactly vec(Q)
    let rhs = RealMatrix::from_column_slice(n * n, 1, q.as_slice()) * -1.0;
    let x = solve_linear_limited(&operator, &rhs, condition_limit)?;
    Ok(symmetrize(&RealMatrix::from_column_slice(
        n,
        n,
        x.as_slice(),
    )))
}

/// Matrix sign function by the Newton iteration `Z ← ½(Z + Z⁻¹)`.
///
/// Determinant scaling is applied while the iterate is far from converged;
/// the final steps are unscaled. Stops when
/// `‖Z_{k+1} − Z_k‖_F ≤ 1e-12·‖Z_k‖_F`, or when the step has reached the
/// roundoff floor and stopped shrinking.
pub fn matrix_sign(h: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    ensure_square(h.nrows(), h.ncols(), "sign function input")?;
    let n = h.nrows();
    let mut z = h.clone();
    let mut scaling = true;
    let mut previous_step = f64::INFINITY;
    for _ in 0..SIGN_MAX_ITERATIONS {
        let lu = z.clone().lu();
        let u = lu.u();
        let mut log_abs_det = 0.0;
        for i in 0..n {
            log_abs_det += u[(i, i)].abs().ln();
        }
        let inverse = lu.try_inverse().ok_or(LinalgError::Singular {
            condition: f64::INFINITY,
        })?;
        let c = if scaling && log_abs_det.is_finite() {
            (-log_abs_det / n as f64).exp()
        } else {
            1.0
        };
        let next = (&z * c + inverse * c.recip()) * 0.5;
        if !next.iter().all(|x| x.is_finite()) {
            return Err(LinalgError::NonFinite("sign iterate"));
        }
        let z_norm = z.norm();
        let step = (&next - &z).norm();
        z = next;
        if !scaling {
            if step <= SIGN_TOLERANCE * z_norm {
                return Ok(z);
            }
            if step <= 1e-8 * z_norm && step >= previous_step {
                return Ok(z);
            }
        }
        if step <= 1e-3 * z_norm {
            scaling = false;
        }
        previous_step = step;
    }
    Err(LinalgError::SignIteration {
        iterations: SIGN_MAX_ITERATIONS,
    })
}

/// Orthonormal basis (`2m × m`) of the invariant subspace belonging to the
/// eigenvalues with negative real part.
///
/// Uses the matrix sign function: `I − sign(H)` is twice the spectral
/// projector onto the stable subspace, and its dominant left singular
/// vectors span that subspace. For real input the Jacobi SVD stays real.
pub fn stable_invariant_subspace(h: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    ensure_square(h.nrows(), h.ncols(), "Hamiltonian")?;
    let n = h.nrows();
    if !n.is_multiple_of(2) {
        return Err(LinalgError::Dimension(format!(
            "Hamiltonian dimension must be even, got {n}"
        )));
    }
    left_half_plane_subspace(h, Some(n / 2))
}

/// Orthonormal basis of the invariant subspace of `h` for the eigenvalues
/// with negative real part; `expected` fixes the required dimension.
pub fn left_half_plane_subspace(
    h: &RealMatrix,
    expected: Option<usize>,
) -> Result<RealMatrix, LinalgError> {
    ensure_square(h.nrows(), h.ncols(), "subspace input")?;
    let n = h.nrows();
    let norm = h.norm().max(NORM_FLOOR);
    let spectrum = eigenvalues(h)?;
    if let Some(lambda) = spectrum.iter().find(|z| z.re.abs() <= 1e-9 * norm) {
        return Err(LinalgError::ImaginaryAxisEigenvalue { lambda: *lambda });
    }
    let stable = spectrum.iter().filter(|z| z.re < 0.0).count();
    if let Some(m) = expected.filter(|&m| m != stable) {
        return Err(LinalgError::StableCount {
            expected: m,
            found: stable,
        });
    }
    if stable == 0 {
        return Ok(RealMatrix::zeros(n, 0));
    }

    let sign = matrix_sign(h)?;
    let projector = RealMatrix::identity(n, n) - sign;
    let svd = jacobi_svd(&to_complex(&projector))?;
    let basis = RealMatrix::from_fn(n, stable, |i, j| svd.u[(i, j)].re);

    let reduced = basis.transpose() * h * &basis;
    let residual = (h * &basis - &basis * reduced).norm();
    let bound = 1e-8 * norm;
    if residual > bound {
        return Err(LinalgError::SubspaceResidual { residual, bound });
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(m: &RealMatrix) -> Vec<C64> {
        eigenvalues(m).unwrap().sorted()
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let m = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let ev = sorted(&m);
        assert!(close(ev[0], C64::new(0.0, -1.0), 1e-12));
        assert!(close(ev[1], C64::new(0.0, 1.0), 1e-12));
        assert_eq!(ev[0], ev[1].conj());
    }

    #[test]
    fn scalar_and_companion_eigenvalues() {
        let ev = sorted(&RealMatrix::from_element(1, 1, 2.0));
        assert_eq!(ev, vec![C64::new(2.0, 0.0)]);
        let m = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let ev = sorted(&m);
        assert!(close(ev[0], C64::new(-2.0, 0.0), 1e-12));
        assert!(close(ev[1], C64::new(-1.0, 0.0), 1e-12));
    }

    #[test]
    fn eigenvalues_reject_rectangular() {
        let m = RealMatrix::zeros(2, 3);
        assert!(matches!(eigenvalues(&m), Err(LinalgError::Dimension(_))));
    }

    #[test]
    fn logdet_examples() {
        let i3 = ComplexMatrix::identity(3, 3);
        assert_eq!(hermitian_logdet(&i3).unwrap(), 0.0);
        let d = to_complex(&RealMatrix::from_diagonal(&DVector::from_vec(vec![
            2.0, 8.0,
        ])));
        assert!((hermitian_logdet(&d).unwrap() - 16f64.ln()).abs() < 1e-14);
        let j = C64::new(0.0, 1.0);
        let two = C64::new(2.0, 0.0);
        let m = ComplexMatrix::from_row_slice(2, 2, &[two, j, -j, two]);
        assert!((hermitian_logdet(&m).unwrap() - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn logdet_rejects_non_hermitian_and_indefinite() {
        let j = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        let m = ComplexMatrix::from_row_slice(2, 2, &[one, j, j, one]);
        assert!(matches!(
            hermitian_logdet(&m),
            Err(LinalgError::NotHermitian { .. })
        ));
        let m = to_complex(&RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(
            hermitian_logdet(&m),
            Err(LinalgError::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn identity_plus_keeps_tiny_perturbations() {
        let eps = 1e-13;
        let m = to_complex(&RealMatrix::from_diagonal(&DVector::from_vec(vec![
            eps,
            2.0 * eps,
        ])));
        let got = logdet_identity_plus(&m).unwrap();
        let want = eps.ln_1p() + (2.0 * eps).ln_1p();
        assert!((got - want).abs() <= 1e-28, "{got} vs {want}");
    }

    #[test]
    fn log_abs_det_both_branches() {
        let small = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.1, 0.05),
                C64::new(0.02, 0.0),
                C64::new(0.0, -0.03),
                C64::new(-0.1, 0.2),
            ],
        );
        let mut full = small.clone();
        full[(0, 0)] += 1.0;
        full[(1, 1)] += 1.0;
        let want = full.determinant().norm().ln();
        assert!((log_abs_det_identity_plus(&small).unwrap() - want).abs() < 1e-14);
        let big = &small * C64::new(20.0, 0.0);
        let mut full = big.clone();
        full[(0, 0)] += 1.0;
        full[(1, 1)] += 1.0;
        let want = full.determinant().norm().ln();
        assert!((log_abs_det_identity_plus(&big).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn stable_subspace_of_diagonal() {
        let h = RealMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
        let x = stable_invariant_subspace(&h).unwrap();
        assert!((x[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!(x[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn stable_subspace_of_scalar_filter_hamiltonian() {
        // eigenvector of [[1, -1], [0, -1]] for λ = -1 solves (H + I)x = 0 by hand
        let h = RealMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, -1.0]);
        let x = stable_invariant_subspace(&h).unwrap();
        let s = 5f64.sqrt();
        let sign = x[(0, 0)].signum();
        assert!((sign * x[(0, 0)] - 1.0 / s).abs() < 1e-12);
        assert!((sign * x[(1, 0)] - 2.0 / s).abs() < 1e-12);
    }

    #[test]
    fn stable_subspace_rejects_imaginary_axis() {
        let h = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(
            stable_invariant_subspace(&h),
            Err(LinalgError::ImaginaryAxisEigenvalue { .. })
        ));
    }

    #[test]
    fn solve_linear_examples() {
        let b = RealMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = solve_linear(&RealMatrix::identity(2, 2), &b).unwrap();
        assert_eq!(x, b);
        let a = RealMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let x = solve_linear(&a, &RealMatrix::identity(2, 2)).unwrap();
        assert_eq!(
            x,
            RealMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25]))
        );
        let a = RealMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let x = solve_linear(&a, &RealMatrix::from_row_slice(2, 1, &[1.0, 1.0])).unwrap();
        assert_eq!(x, RealMatrix::from_row_slice(2, 1, &[0.0, 1.0]));
    }

    #[test]
    fn solve_linear_rejects_singular() {
        let a = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            solve_linear(&a, &RealMatrix::identity(2, 2)),
            Err(LinalgError::Singular { .. })
        ));
        let a = RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        assert!(matches!(
            solve_linear(&a, &RealMatrix::identity(2, 2)),
            Err(LinalgError::Singular { .. })
        ));
    }

    #[test]
    fn lyapunov_scalar() {
        // -2x + 3 = 0
        let x = solve_lyapunov(
            &RealMatrix::from_element(1, 1, -1.0),
            &RealMatrix::from_element(1, 1, 3.0),
        )
        .unwrap();
        assert!((x[(0, 0)] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn psd_factor_reproduces_matrix() {
        let m = RealMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = psd_factor(&m);
        assert!((&s * s.transpose() - &m).norm() < 1e-14);
        let r = inverse_sqrt_spd(&m).unwrap();
        assert!((&r * &m * &r - RealMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn jacobi_svd_reconstructs_rank_deficient() {
        // rank 2 in a 5x5 complex matrix
        let x = ComplexMatrix::from_fn(5, 2, |i, j| {
            C64::new((i + 2 * j) as f64 - 2.0, (i * j) as f64 * 0.3)
        });
        let y = ComplexMatrix::from_fn(2, 5, |i, j| {
            C64::new(1.0 / (1 + i + j) as f64, 0.1 * j as f64)
        });
        let m = &x * &y;
        let svd = jacobi_svd(&m).unwrap();
        let sigma = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            5,
            svd.singular_values.iter().map(|&s| C64::new(s, 0.0)),
        ));
        let rebuilt = &svd.u * sigma * svd.v.adjoint();
        assert!((rebuilt - &m).norm() <= 1e-13 * m.norm());
        assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(svd.singular_values[2] <= 1e-13 * svd.singular_values[0]);
        let vv = svd.v.adjoint() * &svd.v;
        assert!((vv - ComplexMatrix::identity(5, 5)).norm() < 1e-13);
    }

    #[test]
    fn jacobi_svd_wide_and_diagonal() {
        let d = ComplexMatrix::from_row_slice(
            2,
            3,
            &[
                C64::new(0.0, 0.0),
                C64::new(3.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 4.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let svd = jacobi_svd(&d).unwrap();
        assert_eq!(svd.singular_values.len(), 2);
        assert!((svd.singular_values[0] - 4.0).abs() < 1e-15);
        assert!((svd.singular_values[1] - 3.0).abs() < 1e-15);
        assert_eq!(
            min_singular_value(&ComplexMatrix::zeros(3, 3)).unwrap(),
            0.0
        );
    }

    #[test]
    fn pseudo_inverse_of_singular_symmetric() {
        let m = RealMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = symmetric_pseudo_inverse(&m, 1e-12);
        assert!((&p - RealMatrix::from_element(2, 2, 0.25)).norm() < 1e-15);
        assert!((&m * &p * &m - &m).norm() < 1e-14);
    }
}
