use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Default tolerance for structural checks on the model.
pub const MODEL_TOLERANCE: f64 = 1e-12;

/// A finite-dimensional open system in `(S, L, H)` form plus its initial
/// pure state `|η⟩`.
///
/// Any decay rate is folded into `L` (a qubit decaying at rate κ has
/// `L = √κ σ₋`).
#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    scattering: ComplexMatrix,
    coupling: ComplexMatrix,
    hamiltonian: ComplexMatrix,
    initial_state: Vec<Complex64>,
}

impl SystemModel {
    pub fn new(
        scattering: ComplexMatrix,
        coupling: ComplexMatrix,
        hamiltonian: ComplexMatrix,
        initial_state: Vec<Complex64>,
    ) -> Result<Self> {
        Self::with_tolerance(scattering, coupling, hamiltonian, initial_state, MODEL_TOLERANCE)
    }

    pub fn with_tolerance(
        scattering: ComplexMatrix,
        coupling: ComplexMatrix,
        hamiltonian: ComplexMatrix,
        initial_state: Vec<Complex64>,
        tol: f64,
    ) -> Result<Self> {
        let d = initial_state.len();
        if d == 0 {
            return Err(Error::InvalidModel { field: "initial_state", reason: "is empty".into() });
        }
        for (field, m) in [("S", &scattering), ("L", &coupling), ("H", &hamiltonian)] {
            if m.shape() != (d, d) {
                return Err(Error::InvalidModel {
                    field,
                    reason: format!("is {}x{} but the system dimension is {d}", m.rows(), m.cols()),
                });
            }
            if !m.is_finite() {
                return Err(Error::InvalidModel { field, reason: "has non-finite entries".into() });
            }
        }
        if !scattering.is_unitary(tol) {
            return Err(Error::InvalidModel { field: "S", reason: format!("is not unitary within {tol:e}") });
        }
        if !hamiltonian.is_hermitian(tol) {
            return Err(Error::InvalidModel { field: "H", reason: format!("is not Hermitian within {tol:e}") });
        }
        let norm = initial_state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol {
            return Err(Error::InvalidModel {
                field: "initial_state",
                reason: format!("has norm {norm} (must be 1 within {tol:e})"),
            });
        }
        Ok(Self { scattering, coupling, hamiltonian, initial_state })
    }

    pub fn dim(&self) -> usize {
        self.initial_state.len()
    }

    pub fn scattering(&self) -> &ComplexMatrix {
        &self.scattering
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.coupling
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn initial_state(&self) -> &[Complex64] {
        &self.initial_state
    }

    /// `|η⟩⟨η|`
    pub fn initial_density(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.initial_state, &self.initial_state)
    }

    /// Same operators, different initial state.
    pub fn with_initial_state(&self, initial_state: Vec<Complex64>) -> Result<Self> {
        Self::new(self.scattering.clone(), self.coupling.clone(), self.hamiltonian.clone(), initial_state)
    }

    pub(crate) fn check_operand(&self, name: &str, m: &ComplexMatrix) -> Result<()> {
        let d = self.dim();
        if m.shape() != (d, d) {
            return Err(Error::dims(name, (d, d), m.shape()));
        }
        Ok(())
    }
}
