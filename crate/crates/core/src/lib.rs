//! Filtering and master equations for quantum systems driven by
//! multi-photon wavepackets.

pub mod ensemble;
pub mod error;
pub mod fock;
pub mod hierarchy;
pub mod homodyne;
pub mod master;
pub mod matrix;
pub mod model;
pub mod noise;
pub mod photocount;
pub mod photon;
pub mod presets;
pub mod superop;
pub mod validate;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
pub use hierarchy::DensityHierarchy;
pub use master::{integrate_master, MasterEngine};
pub use matrix::ComplexMatrix;
pub use model::SystemModel;
pub use photon::{PhotonState, PulseSet, PulseShape, SubsetIndex};
pub use superop::SuperopKind;
