//! The two-level atom driven by two Gaussian photons, in four pulse
//! configurations.

use crate::error::Result;
use crate::matrix::{ComplexMatrix, ONE, ZERO};
use crate::model::SystemModel;
use crate::photon::{PhotonState, PulseSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomPreset {
    pub name: &'static str,
    /// `(omega, center)` per photon
    pub pulses: [(f64, f64); 2],
    /// A horizon long enough for the atom to relax after both pulses.
    pub t_final: f64,
}

pub const PRESETS: [AtomPreset; 4] = [
    AtomPreset { name: "atom-2photon-a", pulses: [(1.46, 3.0), (1.46, 3.0)], t_final: 12.0 },
    AtomPreset { name: "atom-2photon-b", pulses: [(2.92, 3.0), (2.92, 3.0)], t_final: 12.0 },
    AtomPreset { name: "atom-2photon-c", pulses: [(1.46, 3.0), (2.92, 3.0)], t_final: 12.0 },
    AtomPreset { name: "atom-2photon-d", pulses: [(2.92, 3.0), (2.92, 5.5)], t_final: 14.0 },
];

pub fn preset(name: &str) -> Option<AtomPreset> {
    PRESETS.iter().copied().find(|p| p.name == name || p.name.strip_prefix("atom-2photon-") == Some(name))
}

impl AtomPreset {
    pub fn model(&self) -> SystemModel {
        atom_model()
    }

    pub fn pulse_set(&self, dt: f64) -> Result<PulseSet> {
        PulseSet::gaussians(&self.pulses, dt, self.t_final)
    }

    pub fn photons(&self, dt: f64) -> Result<PhotonState> {
        Ok(PhotonState::new(self.pulse_set(dt)?))
    }
}

/// `S = I`, `L = σ₋ = |g⟩⟨e|`, `H = 0`, starting in `|g⟩`, with
/// `|e⟩ = (1, 0)` and `|g⟩ = (0, 1)`.
pub fn atom_model() -> SystemModel {
    SystemModel::new(
        ComplexMatrix::identity(2),
        lowering(),
        ComplexMatrix::zeros(2, 2),
        vec![ZERO, ONE],
    )
    .expect("atom model is valid")
}

pub fn lowering() -> ComplexMatrix {
    ComplexMatrix::from_real(&[&[0.0, 0.0], &[1.0, 0.0]])
}

/// `|e⟩⟨e|`
pub fn excited_projector() -> ComplexMatrix {
    ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, 0.0]])
}
