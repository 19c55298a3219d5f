//! Counter-based Gaussian noise for Brownian paths.
//!
//! Every draw is addressed by (seed, path, step): the generator is a pure
//! function of its arguments, so paths can be evaluated in any order, in
//! parallel, or resumed mid-stream and still produce identical increments.
//! Implementation: ChaCha8 keyed by the seed, one stream per path, word
//! position addressed by the step counter, Box-Muller on two 53-bit uniforms.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Words of ChaCha output consumed per (path, step) cell: two u64 uniforms.
const WORDS_PER_CELL: u128 = 4;

/// Two independent N(0, 1) samples for the given counter cell.
pub fn normal_pair(seed: u64, path: u64, step: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng.set_word_pos(step as u128 * WORDS_PER_CELL);
    let u1 = unit_open(rng.next_u64());
    let u2 = unit_open(rng.next_u64());
    let r = (-2.0 * u1.ln()).sqrt();
    let phi = std::f64::consts::TAU * u2;
    (r * phi.cos(), r * phi.sin())
}

/// Map a u64 to (0, 1]; the shift keeps ln() finite.
#[inline]
fn unit_open(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal sample for the given counter cell.
pub fn normal(seed: u64, path: u64, step: u64) -> f64 {
    normal_pair(seed, path, step).0
}

/// Brownian increment over a step of length dt.
#[inline]
pub fn wiener_increment(seed: u64, path: u64, step: u64, dt: f64) -> f64 {
    dt.sqrt() * normal(seed, path, step)
}

/// Joint sample of the Brownian increment dW over a step and the pathwise
/// area dI = int_step (w(s) - w(t_step)) ds, with the exact covariance
/// Var dW = dt, Var dI = dt^3/3, Cov = dt^2/2. Using the exact pair keeps
/// second moments of integrated-Brownian test fields free of O(dt) bias.
pub fn wiener_increment_with_area(seed: u64, path: u64, step: u64, dt: f64) -> (f64, f64) {
    let (z1, z2) = normal_pair(seed, path, step);
    let dw = dt.sqrt() * z1;
    let di = dt.powf(1.5) * (0.5 * z1 + z2 / (2.0 * 3.0f64.sqrt()));
    (dw, di)
}
