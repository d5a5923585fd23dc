//! Deterministic parameter initialization.
//!
//! Scaled-uniform fan-in init: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
//! biases zero. Draws are made in f64 and converted, so f32 and f64 builds of
//! the same seed describe the same network.

use super::{fl, Scalar};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Fill a weight slice from the seeded stream.
pub fn uniform_fan_in<F: Scalar>(rng: &mut ChaCha8Rng, fan_in: usize, out: &mut [F]) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    for w in out {
        *w = fl(rng.random_range(-bound..bound));
    }
}
