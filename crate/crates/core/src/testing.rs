//! Fixtures shared by the unit tests.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hierarchy::DensityHierarchy;
use crate::matrix::ComplexMatrix;
use crate::model::SystemModel;
use crate::photon::PulseSet;
use crate::validate;

/// `S = I`, `L = σ₋`, `H = 0` with `|e⟩ = (1, 0)`.
pub fn decaying_qubit(eta: Vec<Complex64>) -> SystemModel {
    SystemModel::new(
        ComplexMatrix::identity(2),
        ComplexMatrix::from_real(&[&[0.0, 0.0], &[1.0, 0.0]]),
        ComplexMatrix::zeros(2, 2),
        eta,
    )
    .unwrap()
}

pub fn random_model(d: usize, seed: u64) -> SystemModel {
    validate::random_model(d, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `(omega, center, k)` Gaussians carrying a phase `e^{ikt}`.
pub fn chirped_pulses(params: &[(f64, f64, f64)]) -> PulseSet {
    validate::chirped_pulses(params, 1e-3).unwrap()
}

pub fn random_hierarchy(n: usize, d: usize, seed: u64) -> DensityHierarchy {
    validate::random_hierarchy(n, d, &mut ChaCha8Rng::seed_from_u64(seed))
}
