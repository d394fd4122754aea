//! Seeded generators of random detectable models, used by the property
//! tests, the acceptance run and the CLI's example files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{eigenvalues, RealMatrix};
use crate::model::{build_model, SystemModel};

pub const MAX_STATES: usize = 6;
pub const MAX_OUTPUTS: usize = 3;

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `(A, C, W, V)` with `A` and `C` standard Gaussian, `W = GGᵀ` of random
/// rank `1..=m`, and `V = I + HHᵀ`. Undetectable draws are redrawn.
pub fn random_model(rng: &mut impl Rng, max_states: usize, max_outputs: usize) -> SystemModel {
    loop {
        let m = rng.random_range(1..=max_states);
        let l = rng.random_range(1..=max_outputs);
        let rank = rng.random_range(1..=m);
        let g = gaussian(rng, m, rank);
        let h = gaussian(rng, l, l);
        let a = gaussian(rng, m, m);
        let c = gaussian(rng, l, m);
        let w = &g * g.transpose();
        let v = RealMatrix::identity(l, l) + &h * h.transpose();
        if let Ok(model) = build_model(a, c, w, v) {
            return model;
        }
    }
}

/// `count` models from [`random_model`] with at most [`MAX_STATES`] states
/// and [`MAX_OUTPUTS`] outputs.
pub fn random_suite(seed: u64, count: usize) -> Vec<SystemModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_model(&mut rng, MAX_STATES, MAX_OUTPUTS))
        .collect()
}

/// Noiseless plants (`W = 0`, `V = I`) whose `A` has at least one
/// eigenvalue with real part above `0.05`.
pub fn noiseless_unstable_suite(seed: u64, count: usize) -> Vec<SystemModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let m = rng.random_range(1..=MAX_STATES);
        let l = rng.random_range(1..=MAX_OUTPUTS);
        let a = gaussian(&mut rng, m, m);
        let c = gaussian(&mut rng, l, m);
        let unstable = eigenvalues(&a).is_ok_and(|s| s.iter().any(|z| z.re > 0.05));
        if !unstable {
            continue;
        }
        let model = build_model(a, c, RealMatrix::zeros(m, m), RealMatrix::identity(l, l));
        if let Ok(model) = model {
            out.push(model);
        }
    }
    out
}

/// One-state, one-output model; panics on invalid values.
pub fn scalar_model(a: f64, c: f64, w: f64, v: f64) -> SystemModel {
    let s = |x| RealMatrix::from_element(1, 1, x);
    build_model(s(a), s(c), s(w), s(v)).expect("valid scalar model")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_are_reproducible_and_sized() {
        let a = random_suite(5, 10);
        let b = random_suite(5, 10);
        assert_eq!(a, b);
        for model in &a {
            assert!(model.state_dim() <= MAX_STATES && model.output_dim() <= MAX_OUTPUTS);
            assert!(model.validation().detectable);
        }
        let n = noiseless_unstable_suite(5, 5);
        assert!(n.iter().all(|m| m.w().norm() == 0.0));
    }
}
