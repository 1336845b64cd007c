use num_complex::Complex64;

use super::DensityHierarchy;
use crate::matrix::{kernel, ZERO};
use crate::model::SystemModel;
use crate::photon::PhotonState;
use crate::superop::OperatorKernel;

/// Assembles, for one pair `(l, r)` at a time, the photon-weighted neighbour
/// sums that every evolution equation is built from:
///
/// * `a = Σ_{μ∉r} c_μ(r)* ρ^{l;r∪μ}`
/// * `b = Σ_{ν∉l} c_ν(l) ρ^{l∪ν;r}`
/// * `c = Σ_{ν∉l} Σ_{μ∉r} c_ν(l) c_μ(r)* ρ^{l∪ν;r∪μ}`
pub(crate) struct Terms<'a> {
    photons: &'a PhotonState,
    pub kernel: OperatorKernel,
    d: usize,
    p: usize,
    full: Vec<Complex64>,
    coefs: Vec<Vec<Complex64>>,
    pair: (usize, usize),
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    tmp: Vec<Complex64>,
    xi: Vec<Complex64>,
}

impl<'a> Terms<'a> {
    pub fn new(model: &SystemModel, photons: &'a PhotonState) -> Self {
        let d = model.dim();
        let p = 1usize << photons.n();
        let dd = d * d;
        let coefs = (0..p).map(|idx| vec![ZERO; photons.children(idx).len()]).collect();
        Self {
            photons,
            kernel: OperatorKernel::new(model),
            d,
            p,
            full: vec![ZERO; p * p * dd],
            coefs,
            pair: (0, 0),
            a: vec![ZERO; dd],
            b: vec![ZERO; dd],
            c: vec![ZERO; dd],
            tmp: vec![ZERO; dd],
            xi: vec![ZERO; photons.n()],
        }
    }

    /// Snapshot `h` and evaluate the annihilation coefficients at `t`.
    pub fn load(&mut self, h: &DensityHierarchy, t: f64) {
        debug_assert_eq!(h.subsets(), self.p);
        h.expand_into(&mut self.full);
        self.photons.pulses().values_at(t, &mut self.xi);
        for (idx, cs) in self.coefs.iter_mut().enumerate() {
            for (c, child) in cs.iter_mut().zip(self.photons.children(idx)) {
                *c = child.amplitude * self.xi[child.mu - 1];
            }
        }
    }

    fn full_block(&self, i: usize, j: usize) -> &[Complex64] {
        let dd = self.d * self.d;
        &self.full[(i * self.p + j) * dd..(i * self.p + j + 1) * dd]
    }

    /// Build `a`, `b`, `c` for the pair at subset positions `(i, j)`.
    pub fn assemble(&mut self, i: usize, j: usize) {
        self.pair = (i, j);
        let dd = self.d * self.d;
        let (p, full) = (self.p, &self.full);
        let block = |x: usize, y: usize| &full[(x * p + y) * dd..(x * p + y + 1) * dd];
        self.a.fill(ZERO);
        self.b.fill(ZERO);
        self.c.fill(ZERO);
        let (kids_l, kids_r) = (self.photons.children(i), self.photons.children(j));
        let (cl, cr) = (&self.coefs[i], &self.coefs[j]);
        for (kr, &wr) in kids_r.iter().zip(cr) {
            kernel::axpy(wr.conj(), block(i, kr.target), &mut self.a);
        }
        for (kl, &wl) in kids_l.iter().zip(cl) {
            kernel::axpy(wl, block(kl.target, j), &mut self.b);
            for (kr, &wr) in kids_r.iter().zip(cr) {
                kernel::axpy(wl * wr.conj(), block(kl.target, kr.target), &mut self.c);
            }
        }
    }

    fn has_right(&self) -> bool {
        !self.photons.children(self.pair.1).is_empty()
    }

    fn has_left(&self) -> bool {
        !self.photons.children(self.pair.0).is_empty()
    }

    /// `out = 𝒟_00(ρ) + 𝒟_10(a) + 𝒟_01(b) + 𝒟_11(c)` for the assembled pair.
    pub fn drift(&mut self, out: &mut [Complex64]) {
        let (i, j) = self.pair;
        let dd = self.d * self.d;
        let rho = &self.full[(i * self.p + j) * dd..(i * self.p + j + 1) * dd];
        self.kernel.lindblad(rho, out, &mut self.tmp);
        let (left, right) = (self.has_left(), self.has_right());
        if right {
            self.kernel.add_creation(&self.a, out, &mut self.tmp);
        }
        if left {
            self.kernel.add_annihilation(&self.b, out, &mut self.tmp);
        }
        if left && right {
            self.kernel.add_scattering(&self.c, out, &mut self.tmp);
        }
    }

    /// Homodyne gain `S̄ = Lρ + ρL† + aS† + Sb` for the assembled pair.
    pub fn gain(&self, out: &mut [Complex64]) {
        let (i, j) = self.pair;
        self.kernel.homodyne_gain(self.full_block(i, j), &self.a, &self.b, out);
    }

    /// Jump map `𝒥 = LρL† + LaS† + SbL† + ScS†` for the assembled pair.
    pub fn jump(&mut self, out: &mut [Complex64]) {
        let (i, j) = self.pair;
        let dd = self.d * self.d;
        let rho = &self.full[(i * self.p + j) * dd..(i * self.p + j + 1) * dd];
        self.kernel.jump(rho, &self.a, &self.b, &self.c, out, &mut self.tmp);
    }
}
