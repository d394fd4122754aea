//! Steady-state Kalman–Bucy filtering error, computed and cross-checked
//! along independent routes.
//!
//! * [`riccati`]: the stabilizing solution `P` of
//!   `AP + PAᵀ + W − PCᵀV⁻¹CP = 0`, by the Hamiltonian sign function and by
//!   Newton–Kleinman, plus the covariance ODE.
//! * [`spectral`]: `tr(CPCᵀV⁻¹)` from the log-determinant of the output
//!   spectrum, from the zeros and poles of that determinant, and the Bode
//!   sensitivity constraint of the filter loop.
//! * [`jensen`]: half-plane Jensen formulas for scalar rational functions.
//! * [`simulate`]: a Monte Carlo oracle for the error covariance and the
//!   whiteness of the innovations.
//!
//! ```
//! use riccati_spectra::{riccati::solve_care, spectral::verify_integral_identity, suite::scalar_model};
//!
//! let model = scalar_model(-1.0, 1.0, 3.0, 1.0);
//! let care = solve_care(&model).unwrap();
//! let report = verify_integral_identity(&model, &care, 1e-10).unwrap();
//! assert!((report.trace_from_care - 1.0).abs() < 1e-12);
//! assert!((report.trace_from_integral - 1.0).abs() < 1e-8);
//! ```

pub mod jensen;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod riccati;
pub mod simulate;
pub mod spectral;
pub mod suite;

pub use linalg::{ComplexMatrix, RealMatrix, Spectrum, C64};
pub use model::{build_model, SystemModel, ValidationReport};
pub use riccati::{solve_care, CareSolution};
