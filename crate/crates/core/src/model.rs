//! The linear plant `ẋ = Ax + w`, `y = Cx + v` with white noise intensities
//! `W` (process) and `V` (measurement), plus its validation.

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{
    self, eigenvalues, ensure_finite, min_singular_value, symmetric_eigenvalues, symmetrize,
    symmetry_defect, LinalgError, RealMatrix, C64,
};

/// Eigenvalues with `Re λ ≥ −DETECTABILITY_MARGIN` must pass the PBH test.
pub const DETECTABILITY_MARGIN: f64 = 1e-9;
const SYMMETRY_TOLERANCE: f64 = 1e-10;
const PSD_TOLERANCE: f64 = 1e-10;
const PD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("model rejected: {}", .0.violation_summary())]
    Rejected(Box<ValidationReport>),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { matrix: &'static str },
    NotSymmetric { matrix: &'static str, defect: f64 },
    WNotPositiveSemidefinite { min_eigenvalue: f64 },
    VNotPositiveDefinite { min_eigenvalue: f64 },
    NotDetectable { eigenvalues: Vec<C64> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { matrix } => write!(f, "{matrix} has non-finite entries"),
            Violation::NotSymmetric { matrix, defect } => {
                write!(f, "{matrix} not symmetric (relative defect {defect:.3e})")
            }
            Violation::WNotPositiveSemidefinite { min_eigenvalue } => write!(
                f,
                "W not positive semidefinite (min eigenvalue {min_eigenvalue:.6e})"
            ),
            Violation::VNotPositiveDefinite { min_eigenvalue } => write!(
                f,
                "V not positive definite (min eigenvalue {min_eigenvalue:.6e})"
            ),
            Violation::NotDetectable { eigenvalues } => {
                write!(f, "(A, C) not detectable; unobservable modes at")?;
                for (i, z) in eigenvalues.iter().enumerate() {
                    let sep = if i == 0 { " " } else { ", " };
                    write!(f, "{sep}{}", format_complex(*z))?;
                }
                Ok(())
            }
        }
    }
}

pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im > 0.0 {
        format!("{}+{}j", z.re, z.im)
    } else {
        format!("{}-{}j", z.re, -z.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymmetryDefects {
    pub w: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DefinitenessMargins {
    /// Smallest eigenvalue of W.
    pub w: f64,
    /// Smallest eigenvalue of V.
    pub v: f64,
}

/// Outcome of validating a candidate model.
///
/// `detectable` is true exactly when `offending_eigenvalues` is empty. The
/// symmetry and definiteness fields are only filled by [`build_model`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub detectable: bool,
    pub offending_eigenvalues: Vec<C64>,
    pub symmetry_defects: Option<SymmetryDefects>,
    pub definiteness_margins: Option<DefinitenessMargins>,
    /// Matrices whose sub-tolerance asymmetry was repaired by symmetrization.
    pub symmetrized: Vec<&'static str>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation_summary(&self) -> String {
        self.violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Validated plant `(A, C, W, V)` with `m` states and `l` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: RealMatrix,
    c: RealMatrix,
    w: RealMatrix,
    v: RealMatrix,
    v_inv: RealMatrix,
    report: ValidationReport,
}

impl SystemModel {
    pub fn a(&self) -> &RealMatrix {
        &self.a
    }

    pub fn c(&self) -> &RealMatrix {
        &self.c
    }

    pub fn w(&self) -> &RealMatrix {
        &self.w
    }

    pub fn v(&self) -> &RealMatrix {
        &self.v
    }

    pub fn v_inverse(&self) -> &RealMatrix {
        &self.v_inv
    }

    /// Number of states `m`.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Number of outputs `l`.
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// `Cᵀ V⁻¹ C`
    pub fn output_information(&self) -> RealMatrix {
        self.c.transpose() * &self.v_inv * &self.c
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.report
    }
}

fn check_dimensions(
    a: &RealMatrix,
    c: &RealMatrix,
    w: &RealMatrix,
    v: &RealMatrix,
) -> Result<(), ModelError> {
    let m = a.nrows();
    let l = c.nrows();
    if m == 0 || l == 0 {
        return Err(ModelError::Dimension("A and C must be non-empty".into()));
    }
    if a.ncols() != m {
        return Err(ModelError::Dimension(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if c.ncols() != m {
        return Err(ModelError::Dimension(format!(
            "C must be {l}x{m}, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if w.shape() != (m, m) {
        return Err(ModelError::Dimension(format!(
            "W must be {m}x{m}, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if v.shape() != (l, l) {
        return Err(ModelError::Dimension(format!(
            "V must be {l}x{l}, got {}x{}",
            v.nrows(),
            v.ncols()
        )));
    }
    Ok(())
}

/// PBH eigenvector test on every eigenvalue of `A` with `Re λ ≥ −1e-9`:
/// `[A − λI; C]` must have smallest singular value above
/// `1e-9·(1 + ‖A‖_F + ‖C‖_F)`.
pub fn validate_detectability(
    a: &RealMatrix,
    c: &RealMatrix,
) -> Result<ValidationReport, ModelError> {
    let m = a.nrows();
    if a.ncols() != m || c.ncols() != m {
        return Err(ModelError::Dimension(format!(
            "A must be m x m and C must have m columns; got A {}x{}, C {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    ensure_finite(a, "A")?;
    ensure_finite(c, "C")?;
    let threshold = 1e-9 * (1.0 + a.norm() + c.norm());
    let l = c.nrows();
    let spectrum = eigenvalues(a)?;
    let mut offending = Vec::new();
    for &lambda in spectrum.iter() {
        if lambda.re < -DETECTABILITY_MARGIN {
            continue;
        }
        let mut stacked = DMatrix::<C64>::zeros(m + l, m);
        for i in 0..m {
            for j in 0..m {
                stacked[(i, j)] = C64::new(a[(i, j)], 0.0);
            }
            stacked[(i, i)] -= lambda;
        }
        for i in 0..l {
            for j in 0..m {
                stacked[(m + i, j)] = C64::new(c[(i, j)], 0.0);
            }
        }
        if min_singular_value(&stacked)? <= threshold {
            offending.push(lambda);
        }
    }
    let mut report = ValidationReport {
        detectable: offending.is_empty(),
        offending_eigenvalues: offending.clone(),
        ..Default::default()
    };
    if !offending.is_empty() {
        report.violations.push(Violation::NotDetectable {
            eigenvalues: offending,
        });
    }
    Ok(report)
}

/// Validate `(A, C, W, V)` and build a [`SystemModel`].
///
/// Every violated invariant is collected before rejecting. `W` may sit on
/// the PSD boundary (including `W = 0`). Asymmetry below `1e-10` relative is
/// repaired by symmetrization and recorded in the report.
pub fn build_model(
    a: RealMatrix,
    c: RealMatrix,
    w: RealMatrix,
    v: RealMatrix,
) -> Result<SystemModel, ModelError> {
    check_dimensions(&a, &c, &w, &v)?;
    let mut violations = Vec::new();
    let mut symmetrized = Vec::new();

    for (name, m) in [("A", &a), ("C", &c), ("W", &w), ("V", &v)] {
        if ensure_finite(m, name).is_err() {
            violations.push(Violation::NonFinite { matrix: name });
        }
    }
    let a_c_finite = !violations
        .iter()
        .any(|x| matches!(x, Violation::NonFinite { matrix: "A" | "C" }));

    let mut fix_symmetry = |name: &'static str, m: RealMatrix, violations: &mut Vec<Violation>| {
        let defect = symmetry_defect(&m);
        if !defect.is_finite() {
            return (m, defect, false);
        }
        if defect > SYMMETRY_TOLERANCE {
            violations.push(Violation::NotSymmetric {
                matrix: name,
                defect,
            });
            (m, defect, false)
        } else {
            if defect > 0.0 {
                symmetrized.push(name);
            }
            (symmetrize(&m), defect, true)
        }
    };
    let (w, w_defect, w_ok) = fix_symmetry("W", w, &mut violations);
    let (v, v_defect, v_ok) = fix_symmetry("V", v, &mut violations);

    let w_min = if w_ok {
        symmetric_eigenvalues(&w)[0]
    } else {
        f64::NAN
    };
    if w_ok && w_min < -PSD_TOLERANCE * w.norm() {
        violations.push(Violation::WNotPositiveSemidefinite {
            min_eigenvalue: w_min,
        });
    }
    let v_min = if v_ok {
        symmetric_eigenvalues(&v)[0]
    } else {
        f64::NAN
    };
    if v_ok && !(v_min > 0.0 && v_min >= PD_TOLERANCE * v.norm()) {
        violations.push(Violation::VNotPositiveDefinite {
            min_eigenvalue: v_min,
        });
    }

    let mut report = if a_c_finite {
        validate_detectability(&a, &c)?
    } else {
        ValidationReport::default()
    };
    report.symmetry_defects = Some(SymmetryDefects {
        w: w_defect,
        v: v_defect,
    });
    report.definiteness_margins = Some(DefinitenessMargins { w: w_min, v: v_min });
    report.symmetrized = symmetrized;
    violations.append(&mut report.violations);
    report.violations = violations;

    if !report.is_valid() {
        return Err(ModelError::Rejected(Box::new(report)));
    }
    let v_inv = symmetrize(&linalg::solve_linear(
        &v,
        &RealMatrix::identity(v.nrows(), v.nrows()),
    )?);
    Ok(SystemModel {
        a,
        c,
        w,
        v,
        v_inv,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> RealMatrix {
        RealMatrix::from_element(1, 1, x)
    }

    #[test]
    fn scalar_detectability() {
        assert!(validate_detectability(&s(1.0), &s(1.0)).unwrap().detectable);
        let r = validate_detectability(&s(1.0), &s(0.0)).unwrap();
        assert!(!r.detectable);
        assert_eq!(r.offending_eigenvalues.len(), 1);
        assert!((r.offending_eigenvalues[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn unobserved_unstable_mode() {
        let a = RealMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        let c = RealMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let r = validate_detectability(&a, &c).unwrap();
        assert!(!r.detectable);
        assert_eq!(r.offending_eigenvalues.len(), 1);
        assert!((r.offending_eigenvalues[0] - C64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn hurwitz_is_detectable_without_output() {
        let a = RealMatrix::from_row_slice(2, 2, &[-1.0, 3.0, 0.0, -2.0]);
        let c = RealMatrix::zeros(1, 2);
        assert!(validate_detectability(&a, &c).unwrap().detectable);
    }

    #[test]
    fn marginal_modes_must_be_observed() {
        let a = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let c = RealMatrix::zeros(1, 2);
        let r = validate_detectability(&a, &c).unwrap();
        assert_eq!(r.offending_eigenvalues.len(), 2);
    }

    #[test]
    fn accepts_scalar_model() {
        let model = build_model(s(-1.0), s(1.0), s(3.0), s(1.0)).unwrap();
        assert_eq!(model.state_dim(), 1);
        assert_eq!(model.output_dim(), 1);
        assert!(model.validation().detectable);
    }

    #[test]
    fn accepts_zero_process_noise() {
        assert!(build_model(s(1.0), s(1.0), s(0.0), s(1.0)).is_ok());
    }

    #[test]
    fn rejects_singular_v() {
        let err = build_model(s(-1.0), s(1.0), s(3.0), s(0.0)).unwrap_err();
        assert!(err.to_string().contains("V not positive definite"), "{err}");
    }

    #[test]
    fn rejects_negative_w() {
        let err = build_model(s(-1.0), s(1.0), s(-1.0), s(1.0)).unwrap_err();
        assert!(
            err.to_string().contains("W not positive semidefinite"),
            "{err}"
        );
    }

    #[test]
    fn reports_every_violation() {
        let err = build_model(s(1.0), s(0.0), s(-1.0), s(0.0)).unwrap_err();
        let ModelError::Rejected(report) = err else {
            panic!("expected rejection")
        };
        assert_eq!(report.violations.len(), 3);
        assert!(!report.detectable);
    }

    #[test]
    fn repairs_roundoff_asymmetry() {
        let w = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-14, 1.0]);
        let a = RealMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let c = RealMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let model = build_model(a, c, w, s(1.0)).unwrap();
        assert_eq!(model.w(), &model.w().transpose());
        assert_eq!(model.validation().symmetrized, vec!["W"]);
    }

    #[test]
    fn rejects_large_asymmetry() {
        let w = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let a = RealMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let c = RealMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let err = build_model(a, c, w, s(1.0)).unwrap_err();
        assert!(err.to_string().contains("W not symmetric"));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let err = build_model(s(1.0), RealMatrix::zeros(1, 2), s(1.0), s(1.0)).unwrap_err();
        assert!(matches!(err, ModelError::Dimension(_)));
    }
}
