//! The coupled family of reduced operators `ρ^{l;r}`, one per ordered pair of
//! photon subsets, and the machinery shared by the deterministic and
//! conditional evolutions.

mod state;
mod terms;

pub use state::DensityHierarchy;
pub(crate) use terms::Terms;
