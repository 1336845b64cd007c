//! Multi-photon wavepackets: pulses, subset bookkeeping and the
//! normalization constants of the partially annihilated states.

mod permanent;
mod pulse;
mod subset;
mod wick;

use num_complex::Complex64;

use crate::matrix::{ComplexMatrix, ZERO};

pub use permanent::permanent;
pub(crate) use permanent::permanent_with;
pub use pulse::{PulseSet, PulseShape, NORM_TOLERANCE};
pub use subset::{SubsetIndex, SubsetOrder, MAX_PHOTONS};
pub use wick::vacuum_expectation;

/// Norms `N_r` of the unnormalized states `Π_{i∉r} B*(ξ_i)|0⟩`, indexed by
/// subset position.
#[derive(Clone, Debug)]
pub struct NormalizationTable {
    values: Vec<f64>,
}

impl NormalizationTable {
    pub fn get(&self, order: &SubsetOrder, r: &SubsetIndex) -> f64 {
        self.values[order.index(r)]
    }

    pub fn by_index(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// One term of `dB(t)|Φ_r⟩`: removing photon `mu` leads to the state at
/// subset position `target`, weighted by `amplitude · ξ_mu(t)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Child {
    pub mu: usize,
    pub target: usize,
    pub amplitude: f64,
}

/// Everything about an `n`-photon input that does not depend on the system:
/// pulses, Gram matrix, subset order and normalization constants.
#[derive(Clone, Debug)]
pub struct PhotonState {
    pulses: PulseSet,
    gram: ComplexMatrix,
    order: SubsetOrder,
    norms: NormalizationTable,
    children: Vec<Vec<Child>>,
}

impl PhotonState {
    pub fn new(pulses: PulseSet) -> Self {
        let n = pulses.n();
        let gram = pulses.gram_matrix();
        let order = SubsetOrder::new(n);
        let values = order
            .iter()
            .map(|r| {
                let comp = r.complement();
                permanent_with(comp.len(), |i, j| gram[(comp[i] - 1, comp[j] - 1)]).re
            })
            .collect();
        let norms = NormalizationTable { values };
        let children = order
            .iter()
            .map(|r| {
                let nr = norms.get(&order, &r);
                r.complement()
                    .into_iter()
                    .map(|mu| {
                        let target = order.index(&r.with(mu));
                        Child { mu, target, amplitude: (norms.by_index(target) / nr).sqrt() }
                    })
                    .collect()
            })
            .collect();
        Self { pulses, gram, order, norms, children }
    }

    pub fn n(&self) -> usize {
        self.pulses.n()
    }

    pub fn pulses(&self) -> &PulseSet {
        &self.pulses
    }

    pub fn gram(&self) -> &ComplexMatrix {
        &self.gram
    }

    pub fn order(&self) -> &SubsetOrder {
        &self.order
    }

    pub fn normalization_table(&self) -> &NormalizationTable {
        &self.norms
    }

    pub fn normalization(&self, r: &SubsetIndex) -> f64 {
        self.norms.get(&self.order, r)
    }

    pub(crate) fn children(&self, idx: usize) -> &[Child] {
        &self.children[idx]
    }

    /// `c_μ = √(N_{r∪μ}/N_r) ξ_μ(t)` for each photon `μ ∉ r`.
    pub fn annihilation_coefficients(&self, r: &SubsetIndex, t: f64) -> Vec<(usize, Complex64)> {
        self.children[self.order.index(r)]
            .iter()
            .map(|c| (c.mu, c.amplitude * self.pulses.value(c.mu - 1, t)))
            .collect()
    }

    /// `⟨Φ_l|Φ_r⟩` between normalized partially annihilated states.
    pub fn state_overlap(&self, l: &SubsetIndex, r: &SubsetIndex) -> Complex64 {
        if l.len() != r.len() {
            return ZERO;
        }
        let (cl, cr) = (l.complement(), r.complement());
        let p = permanent_with(cl.len(), |i, j| self.gram[(cl[i] - 1, cr[j] - 1)]);
        p / (self.normalization(l) * self.normalization(r)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(params: &[(f64, f64)]) -> PhotonState {
        PhotonState::new(PulseSet::gaussians(params, 1e-3, 0.0).unwrap())
    }

    fn subset(n: usize, m: &[usize]) -> SubsetIndex {
        SubsetIndex::new(n, m).unwrap()
    }

    #[test]
    fn two_photon_normalization() {
        let s = state(&[(1.46, 3.0), (1.46, 4.0)]);
        let ov = s.gram()[(0, 1)];
        let n2 = s.normalization(&SubsetIndex::empty(2));
        assert!((n2 - (1.0 + ov.norm_sqr())).abs() < 1e-12);
        assert!((s.normalization(&SubsetIndex::full(2)) - 1.0).abs() < 1e-15);
        assert!((s.normalization(&subset(2, &[1])) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_pulses_give_factorial() {
        let s = state(&[(2.0, 4.0); 4]);
        let n0 = s.normalization(&SubsetIndex::empty(4));
        assert!((n0 - 24.0).abs() < 1e-9);
        assert!((s.normalization(&subset(4, &[2])) - 6.0).abs() < 1e-9);
    }

    #[test]
    fn normalization_matches_wick_expansion() {
        let s = state(&[(1.46, 3.0), (2.92, 3.4), (1.0, 5.0), (2.0, 4.0)]);
        let g = s.gram();
        for r in s.order().iter() {
            let comp: Vec<usize> = r.complement().iter().map(|m| m - 1).collect();
            let w = vacuum_expectation(g, &comp, &comp);
            assert!(w.im.abs() < 1e-12);
            assert!((w.re - s.normalization(&r)).abs() < 1e-12 * w.re.max(1.0), "{r}");
            assert!(s.normalization(&r) > 0.0);
        }
    }

    #[test]
    fn annihilation_coefficients_two_photons() {
        let s = state(&[(1.46, 3.0), (2.92, 3.5)]);
        let t = 2.7;
        let n2 = s.normalization(&SubsetIndex::empty(2));
        let c = s.annihilation_coefficients(&SubsetIndex::empty(2), t);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].0, c[1].0), (1, 2));
        assert!((c[0].1 - s.pulses().value(0, t) / n2.sqrt()).norm() < 1e-14);
        assert!((c[1].1 - s.pulses().value(1, t) / n2.sqrt()).norm() < 1e-14);
        assert!(s.annihilation_coefficients(&SubsetIndex::full(2), t).is_empty());
        let c1 = s.annihilation_coefficients(&subset(2, &[2]), t);
        assert_eq!(c1.len(), 1);
        assert!((c1[0].1 - s.pulses().value(0, t)).norm() < 1e-14);
    }

    #[test]
    fn single_photon_coefficient_is_pulse() {
        let s = state(&[(1.46, 3.0)]);
        let c = s.annihilation_coefficients(&SubsetIndex::empty(1), 3.3);
        assert!((c[0].1.norm_sqr() - s.pulses().value(0, 3.3).norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn overlaps() {
        let s = state(&[(1.46, 3.0), (2.0, 3.8), (1.7, 4.4)]);
        let ord = s.order();
        for l in ord.iter() {
            for r in ord.iter() {
                let a = s.state_overlap(&l, &r);
                let b = s.state_overlap(&r, &l);
                assert!((a - b.conj()).norm() < 1e-14);
                if l.len() != r.len() {
                    assert_eq!(a, ZERO);
                }
                if l == r {
                    assert!((a - 1.0).norm() < 1e-12);
                }
                // Wick oracle on the unnormalized states
                if l.len() == r.len() {
                    let cl: Vec<usize> = l.complement().iter().map(|m| m - 1).collect();
                    let cr: Vec<usize> = r.complement().iter().map(|m| m - 1).collect();
                    let w = vacuum_expectation(s.gram(), &cl, &cr)
                        / (s.normalization(&l) * s.normalization(&r)).sqrt();
                    assert!((a - w).norm() < 1e-12);
                }
            }
        }
        // ⟨Φ_{l={2}}|Φ_{r={1}}⟩ keeps photon 1 on the left and photon 2 on the right
        let a = s.state_overlap(&subset(3, &[2, 3]), &subset(3, &[1, 3]));
        assert!((a - s.gram()[(0, 1)]).norm() < 1e-14);
    }
}
