//! Counter-based randomness: the draw for step `m` of the trajectory with
//! seed `s` depends only on `(s, m)`, never on what ran before it.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn stream(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    rng
}

/// `dW ~ N(0, dt)` for step `step`.
pub fn wiener_increment(seed: u64, step: usize, dt: f64) -> f64 {
    let z: f64 = stream(seed, step).sample(StandardNormal);
    z * dt.sqrt()
}

/// Uniform on `[0, 1)` for step `step`.
pub fn uniform(seed: u64, step: usize) -> f64 {
    stream(seed, step).random()
}
