//! Worked examples with hand-derived answers, plus suite-wide checks that
//! compare two independent routes to the same quantity.

use riccati_spectra::jensen::{verify_jensen, JensenError, JensenMode, RationalFunction};
use riccati_spectra::linalg::{RealMatrix, C64};
use riccati_spectra::model::{build_model, validate_detectability, ModelError};
use riccati_spectra::riccati::{
    integrate_riccati_ode, newton_kleinman_iterates, solve_care, OdeOptions, RiccatiError,
};
use riccati_spectra::spectral::{
    bode_sensitivity_integral, factorization_residual, special_case_checks, trace_bounds,
    verify_integral_identity, zeros_poles_form,
};
use riccati_spectra::suite::{random_suite, scalar_model};

fn m(rows: usize, cols: usize, data: &[f64]) -> RealMatrix {
    RealMatrix::from_row_slice(rows, cols, data)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn scalar_riccati_solutions() {
    for ((a, c, w, v), p) in [
        ((1.0, 1.0, 0.0, 1.0), 2.0),
        ((-1.0, 1.0, 3.0, 1.0), 1.0),
        ((-1.0, 1.0, 0.0, 1.0), 0.0),
    ] {
        let care = solve_care(&scalar_model(a, c, w, v)).unwrap();
        assert!(close(care.p()[(0, 0)], p, 1e-12), "P for A={a}");
        assert!(close(care.k()[(0, 0)], p, 1e-12), "K for A={a}");
    }
}

#[test]
fn newton_kleinman_decreases_monotonically_from_a_large_gain() {
    let model = scalar_model(1.0, 1.0, 0.0, 1.0);
    let (solution, iterates) = newton_kleinman_iterates(&model, &m(1, 1, &[3.0])).unwrap();
    assert!(close(solution.p()[(0, 0)], 2.0, 1e-12));
    let values: Vec<f64> = iterates.iter().map(|p| p[(0, 0)]).collect();
    assert!(
        values.windows(2).all(|w| w[1] <= w[0] + 1e-12),
        "{values:?}"
    );
}

#[test]
fn scalar_riccati_ode_reaches_closed_form() {
    let model = scalar_model(1.0, 1.0, 0.0, 1.0);
    let care = solve_care(&model).unwrap();
    let traj = integrate_riccati_ode(
        &model,
        &m(1, 1, &[5.0]),
        20.0,
        1e-3,
        OdeOptions {
            stride: 1000,
            reference: Some(&care),
        },
    )
    .unwrap();
    assert!(traj.terminal_gap.unwrap() <= 1e-6);
    // P(t) = 2 / (1 − 0.6·e^{−2t}) from P(0) = 5
    for (t, p) in traj.times.iter().zip(&traj.covariances) {
        let exact = 2.0 / (1.0 - 0.6 * (-2.0 * t).exp());
        assert!(close(p[(0, 0)], exact, 1e-9 * exact), "t = {t}");
    }
}

#[test]
fn marginal_plant_without_noise_has_no_stabilizing_solution() {
    let model = scalar_model(0.0, 1.0, 0.0, 1.0);
    assert!(matches!(
        solve_care(&model),
        Err(RiccatiError::NoStabilizingSolution(_))
    ));
}

#[test]
fn detectability_examples() {
    let hidden =
        validate_detectability(&m(2, 2, &[-1.0, 0.0, 0.0, 2.0]), &m(1, 2, &[1.0, 0.0])).unwrap();
    assert!(!hidden.detectable);
    assert_eq!(hidden.offending_eigenvalues.len(), 1);
    assert!((hidden.offending_eigenvalues[0] - C64::new(2.0, 0.0)).norm() < 1e-12);

    let err = build_model(
        m(1, 1, &[1.0]),
        m(1, 1, &[0.0]),
        m(1, 1, &[-1.0]),
        m(1, 1, &[0.0]),
    )
    .unwrap_err();
    let ModelError::Rejected(report) = err else {
        panic!("expected a rejection report");
    };
    // all three problems are reported together
    assert!(report.violations.len() >= 3, "{:?}", report.violations);
}

#[test]
fn zeros_poles_examples() {
    for ((a, w), trace, cancelled) in [
        ((0.0, 1.0), 1.0, false),
        ((1.0, 0.0), 2.0, true),
        ((-1.0, 3.0), 1.0, false),
    ] {
        let model = scalar_model(a, 1.0, w, 1.0);
        let care = solve_care(&model).unwrap();
        let zp = zeros_poles_form(&model, &care).unwrap();
        assert!(close(zp.trace, trace, 1e-10), "A = {a}");
        assert_eq!(zp.cancelled > 0, cancelled, "A = {a}");
    }
}

#[test]
fn bode_examples() {
    for ((a, w), expected) in [((1.0, 0.0), 0.0), ((-1.0, 3.0), -0.5), ((-1.0, 0.0), 0.0)] {
        let model = scalar_model(a, 1.0, w, 1.0);
        let care = solve_care(&model).unwrap();
        let bode = bode_sensitivity_integral(&model, &care, 1e-10).unwrap();
        assert!(
            close(bode.integral, expected, 1e-8),
            "A = {a}: {}",
            bode.integral
        );
        assert!(close(bode.closed_form, expected, 1e-12));
    }
}

#[test]
fn trace_bounds_examples() {
    let model = scalar_model(-1.0, 1.0, 3.0, 1.0);
    let care = solve_care(&model).unwrap();
    let report = verify_integral_identity(&model, &care, 1e-10).unwrap();
    let b = trace_bounds(&model, &report);
    assert_eq!(b.lower, b.upper);
    assert!(close(b.lower, report.trace_from_integral, 0.0));

    let model = build_model(
        m(2, 2, &[-1.0, 0.5, 0.0, -2.0]),
        m(1, 2, &[1.0, 0.0]),
        RealMatrix::identity(2, 2),
        m(1, 1, &[1.0]),
    )
    .unwrap();
    let care = solve_care(&model).unwrap();
    let report = verify_integral_identity(&model, &care, 1e-10).unwrap();
    assert_eq!(trace_bounds(&model, &report).upper, f64::INFINITY);
}

#[test]
fn jensen_examples() {
    let f = |p: &[f64], q: &[f64]| RationalFunction::new(p, q).unwrap();
    for (func, mode, expected) in [
        (f(&[-1.0, 1.0], &[1.0, 1.0]), JensenMode::StablePoles, 0.0),
        (f(&[2.0, 1.0], &[1.0, 1.0]), JensenMode::StablePoles, 0.5),
        (f(&[2.0, 1.0], &[-1.0, 1.0]), JensenMode::General, 0.5),
    ] {
        let r = verify_jensen(&func, mode, 1e-10).unwrap();
        assert!(close(r.closed_form, expected, 1e-14));
        assert!(r.residual <= 1e-8);
    }
    // (s+2)(s−3) / ((s+1)(s+4))
    let g = f(&[-6.0, -1.0, 1.0], &[4.0, 5.0, 1.0]);
    let r = verify_jensen(&g, JensenMode::StablePoles, 1e-10).unwrap();
    assert!(r.residual <= 1e-8);
    // zero pair 0.5 ± 2j over stable poles
    let h = f(&[4.25, -1.0, 1.0], &[2.0, 3.0, 1.0]);
    let r = verify_jensen(&h, JensenMode::StablePoles, 1e-10).unwrap();
    assert!(close(r.zeros_term, 1.0, 1e-12));

    let unstable = f(&[2.0, 1.0], &[-1.0, 1.0]);
    assert!(matches!(
        verify_jensen(&unstable, JensenMode::StablePoles, 1e-10),
        Err(JensenError::UnstablePole { .. })
    ));
    assert!(matches!(
        RationalFunction::new(&[1.0, 1.0], &[1.0, 2.0, 1.0]),
        Err(JensenError::DegreeMismatch { .. })
    ));
}

#[test]
fn spectral_factorization_holds_on_suite() {
    let omegas = [0.0, 0.05, 0.3, 1.0, 2.7, 10.0, 100.0];
    for (i, model) in random_suite(99, 40).iter().enumerate() {
        let care = solve_care(model).unwrap();
        let r = factorization_residual(model, &care, &omegas).unwrap();
        assert!(r <= 1e-8, "model {i}: {r:.3e}");
    }
}

#[test]
fn reduced_forms_hold_on_suite() {
    let mut applied = 0;
    for (i, model) in random_suite(123, 40).iter().enumerate() {
        let care = solve_care(model).unwrap();
        for case in special_case_checks(model, &care, 1e-6, 1e-10).unwrap() {
            assert!(case.passed(), "model {i}: {case:?}");
            applied += usize::from(case.is_applied());
        }
    }
    assert!(applied > 0);
}
