use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{kernel, ComplexMatrix, ZERO};
use crate::model::SystemModel;
use crate::photon::{PhotonState, SubsetIndex};

/// Reduced system operators `ρ^{l;r}` for every pair of subsets `l`, `r` of
/// annihilated photons.
///
/// Only pairs with `rank(l) ≤ rank(r)` are stored; the rest follow from
/// `ρ^{r;l} = (ρ^{l;r})†`. Pairs are laid out by `(rank(l), rank(r))`, so the
/// first block is the physical state `ρ^{∅;∅}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityHierarchy {
    n: usize,
    d: usize,
    subsets: usize,
    data: Vec<Complex64>,
}

impl DensityHierarchy {
    pub fn zeros(n: usize, d: usize) -> Self {
        let subsets = 1usize << n;
        let pairs = subsets * (subsets + 1) / 2;
        Self { n, d, subsets, data: vec![ZERO; pairs * d * d] }
    }

    /// `ρ^{l;r}(0) = ⟨Φ_r|Φ_l⟩ |η⟩⟨η|`
    pub fn initial(model: &SystemModel, photons: &PhotonState) -> Self {
        let mut h = Self::zeros(photons.n(), model.dim());
        let eta = model.initial_density();
        let order = photons.order();
        for (p, (i, j)) in h.pair_list().into_iter().enumerate() {
            let w = photons.state_overlap(&order.subset(j), &order.subset(i));
            if w == ZERO {
                continue;
            }
            let block = h.block_mut(p);
            for (b, e) in block.iter_mut().zip(eta.as_slice()) {
                *b = w * e;
            }
        }
        h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of stored (canonical) pairs, `2^n(2^n+1)/2`.
    pub fn component_count(&self) -> usize {
        self.subsets * (self.subsets + 1) / 2
    }

    /// Canonical pairs as 0-based subset positions, in storage order.
    pub fn pair_list(&self) -> Vec<(usize, usize)> {
        let p = self.subsets;
        (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect()
    }

    pub(crate) fn subsets(&self) -> usize {
        self.subsets
    }

    pub(crate) fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j < self.subsets);
        i * self.subsets - i * (i.saturating_sub(1)) / 2 + (j - i)
    }

    pub(crate) fn block(&self, p: usize) -> &[Complex64] {
        let dd = self.d * self.d;
        &self.data[p * dd..(p + 1) * dd]
    }

    pub(crate) fn block_mut(&mut self, p: usize) -> &mut [Complex64] {
        let dd = self.d * self.d;
        &mut self.data[p * dd..(p + 1) * dd]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// `ρ^{l;r}` for 0-based subset positions, resolving non-canonical pairs
    /// by adjoint.
    pub fn component_at(&self, i: usize, j: usize) -> ComplexMatrix {
        let d = self.d;
        let data = if i <= j {
            self.block(self.pair_index(i, j)).to_vec()
        } else {
            let mut out = vec![ZERO; d * d];
            kernel::adjoint(d, self.block(self.pair_index(j, i)), &mut out);
            out
        };
        ComplexMatrix::from_vec(d, d, data).expect("block has d*d entries")
    }

    pub fn component(&self, l: &SubsetIndex, r: &SubsetIndex) -> Result<ComplexMatrix> {
        for s in [l, r] {
            if s.n() != self.n {
                return Err(Error::InvalidSubset(format!(
                    "subset {s} belongs to a {}-photon hierarchy, this one has {}",
                    s.n(),
                    self.n
                )));
            }
        }
        Ok(self.component_at(l.rank() - 1, r.rank() - 1))
    }

    /// The physical system state `ρ^{∅;∅}`.
    pub fn top(&self) -> ComplexMatrix {
        self.component_at(0, 0)
    }

    pub fn top_trace(&self) -> Complex64 {
        kernel::trace(self.d, self.block(0))
    }

    /// `Tr[(ρ^{l;r})† X]`
    pub fn expectation(&self, x: &ComplexMatrix, l: &SubsetIndex, r: &SubsetIndex) -> Result<Complex64> {
        self.check_observable(x)?;
        Ok(self.component(l, r)?.hs_inner(x))
    }

    /// `Tr[ρ^{∅;∅} X]`, real for Hermitian `X`.
    pub fn top_expectation(&self, x: &ComplexMatrix) -> Result<Complex64> {
        self.check_observable(x)?;
        Ok(kernel::hs_inner(self.block(0), x.as_slice()))
    }

    fn check_observable(&self, x: &ComplexMatrix) -> Result<()> {
        if x.shape() != (self.d, self.d) {
            return Err(Error::dims("observable", (self.d, self.d), x.shape()));
        }
        Ok(())
    }

    /// Traces of the stored pairs, in storage order.
    pub fn traces(&self) -> Vec<Complex64> {
        (0..self.component_count()).map(|p| kernel::trace(self.d, self.block(p))).collect()
    }

    /// Largest `‖ρ^{l;l} − (ρ^{l;l})†‖` over the diagonal pairs; the
    /// off-diagonal symmetry holds by construction.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.d;
        (0..self.subsets)
            .map(|i| {
                let b = self.block(self.pair_index(i, i));
                (0..d)
                    .flat_map(|r| (0..d).map(move |c| (r, c)))
                    .map(|(r, c)| (b[r * d + c] - b[c * d + r].conj()).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.n, self.d), (other.n, other.d));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, f: f64) {
        for z in &mut self.data {
            *z *= f;
        }
    }

    /// Writes every pair, canonical or not, into `full` as a
    /// `2^n x 2^n` grid of `d x d` blocks.
    pub(crate) fn expand_into(&self, full: &mut [Complex64]) {
        let (p, d) = (self.subsets, self.d);
        let dd = d * d;
        for i in 0..p {
            for j in i..p {
                let src = self.block(self.pair_index(i, j));
                full[(i * p + j) * dd..(i * p + j + 1) * dd].copy_from_slice(src);
                if i != j {
                    kernel::adjoint(d, src, &mut full[(j * p + i) * dd..(j * p + i + 1) * dd]);
                }
            }
        }
    }
}
