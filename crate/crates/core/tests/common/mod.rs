#![allow(dead_code)]

use crimesir::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rates in `[0, 2]`, `Ω ∈ [0, 1]`, `Λ ∈ [1, 200]`; `φ` is kept away from zero.
pub fn random_params(rng: &mut impl Rng) -> ModelParams {
    let mut rate = || rng.gen_range(0.0..=2.0);
    let p = ModelParams {
        lambda: 0.0,
        phi: 0.0,
        delta1: rate(),
        delta2: rate(),
        omega: 0.0,
        rho: rate(),
        gamma1: rate(),
        gamma2: rate(),
        alpha: rate(),
        beta: rate(),
    };
    ModelParams {
        lambda: rng.gen_range(1.0..=200.0),
        phi: rng.gen_range(1e-3..=2.0),
        omega: rng.gen_range(0.0..=1.0),
        ..p
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Relative error with an absolute floor for values near zero.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs + rel * a.abs().max(b.abs())
}
