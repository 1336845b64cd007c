//! `n` photons sharing one pulse shape. The state space collapses to a
//! ladder `ρ^{p;q}`, `p, q = 0..=n` photons left on each side, which gives
//! an independent check on the general subset hierarchy.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, ZERO};
use crate::model::SystemModel;
use crate::photon::PulseSet;
use crate::superop::{apply_schrodinger, SuperopKind};

#[derive(Clone, Debug, PartialEq)]
pub struct FockLadder {
    n: usize,
    blocks: Vec<ComplexMatrix>,
}

impl FockLadder {
    /// `ρ^{p;q}(0) = δ_pq |η⟩⟨η|`
    pub fn initial(model: &SystemModel, n: usize) -> Self {
        let eta = model.initial_density();
        let zero = ComplexMatrix::zeros(model.dim(), model.dim());
        let blocks = (0..(n + 1) * (n + 1))
            .map(|k| if k / (n + 1) == k % (n + 1) { eta.clone() } else { zero.clone() })
            .collect();
        Self { n, blocks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn component(&self, p: usize, q: usize) -> &ComplexMatrix {
        &self.blocks[p * (self.n + 1) + q]
    }

    /// `ρ^{n;n}`, the physical state.
    pub fn top(&self) -> &ComplexMatrix {
        self.component(self.n, self.n)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(ComplexMatrix::is_finite)
    }

    fn map(&self, f: impl Fn(usize, usize) -> ComplexMatrix) -> Self {
        let n = self.n;
        Self { n, blocks: (0..(n + 1) * (n + 1)).map(|k| f(k / (n + 1), k % (n + 1))).collect() }
    }

    fn axpy(&self, k: &Self, h: f64) -> Self {
        self.map(|p, q| self.component(p, q) + &k.component(p, q).scale(Complex64::new(h, 0.0)))
    }
}

pub struct FockEngine<'a> {
    model: &'a SystemModel,
    pulses: &'a PulseSet,
    n: usize,
}

impl<'a> FockEngine<'a> {
    /// Uses the first pulse of `pulses` as the common shape.
    pub fn new(model: &'a SystemModel, pulses: &'a PulseSet, n: usize) -> Result<Self> {
        if n > 0 && pulses.n() == 0 {
            return Err(Error::InvalidArgument("a photon ladder needs a pulse shape".into()));
        }
        Ok(Self { model, pulses, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn xi(&self, t: f64) -> Complex64 {
        if self.pulses.n() == 0 {
            ZERO
        } else {
            self.pulses.value(0, t)
        }
    }

    fn d(&self, kind: SuperopKind, m: &ComplexMatrix) -> ComplexMatrix {
        apply_schrodinger(kind, self.model, m).expect("ladder blocks have system dimension")
    }

    /// `dρ^{p;q} = 𝒟_00(ρ^{p;q}) + √q ξ* 𝒟_10(ρ^{p;q−1}) + √p ξ 𝒟_01(ρ^{p−1;q})
    ///           + √(pq) |ξ|² 𝒟_11(ρ^{p−1;q−1})`
    pub fn rhs(&self, y: &FockLadder, t: f64) -> FockLadder {
        let xi = self.xi(t);
        y.map(|p, q| {
            let mut out = self.d(SuperopKind::K00, y.component(p, q));
            let (sp, sq) = ((p as f64).sqrt(), (q as f64).sqrt());
            if q > 0 {
                out = &out + &self.d(SuperopKind::K10, y.component(p, q - 1)).scale(sq * xi.conj());
            }
            if p > 0 {
                out = &out + &self.d(SuperopKind::K01, y.component(p - 1, q)).scale(sp * xi);
            }
            if p > 0 && q > 0 {
                out = &out + &self.d(SuperopKind::K11, y.component(p - 1, q - 1)).scale(Complex64::new(sp * sq * xi.norm_sqr(), 0.0));
            }
            out
        })
    }

    pub fn rk4_step(&self, y: &mut FockLadder, t: f64, dt: f64) {
        let k1 = self.rhs(y, t);
        let k2 = self.rhs(&y.axpy(&k1, dt / 2.0), t + dt / 2.0);
        let k3 = self.rhs(&y.axpy(&k2, dt / 2.0), t + dt / 2.0);
        let k4 = self.rhs(&y.axpy(&k3, dt), t + dt);
        let sum = k1.axpy(&k2, 2.0).axpy(&k3, 2.0).axpy(&k4, 1.0);
        *y = y.axpy(&sum, dt / 6.0);
    }

    /// `S̄^{p;q} = Lρ^{p;q} + ρ^{p;q}L† + √q ξ* ρ^{p;q−1}S† + √p ξ Sρ^{p−1;q}`
    pub fn gain(&self, y: &FockLadder, t: f64) -> FockLadder {
        let xi = self.xi(t);
        let (l, s) = (self.model.coupling(), self.model.scattering());
        let (ld, sd) = (l.adjoint(), s.adjoint());
        y.map(|p, q| {
            let rho = y.component(p, q);
            let mut out = &(l * rho) + &(rho * &ld);
            if q > 0 {
                out = &out + &(y.component(p, q - 1) * &sd).scale((q as f64).sqrt() * xi.conj());
            }
            if p > 0 {
                out = &out + &(s * y.component(p - 1, q)).scale((p as f64).sqrt() * xi);
            }
            out
        })
    }

    /// `𝒥^{p;q} = Lρ^{p;q}L† + √q ξ* Lρ^{p;q−1}S† + √p ξ Sρ^{p−1;q}L†
    ///           + √(pq) |ξ|² Sρ^{p−1;q−1}S†`
    pub fn jump(&self, y: &FockLadder, t: f64) -> FockLadder {
        let xi = self.xi(t);
        let (l, s) = (self.model.coupling(), self.model.scattering());
        let (ld, sd) = (l.adjoint(), s.adjoint());
        y.map(|p, q| {
            let (sp, sq) = ((p as f64).sqrt(), (q as f64).sqrt());
            let mut out = &(l * y.component(p, q)) * &ld;
            if q > 0 {
                out = &out + &(&(l * y.component(p, q - 1)) * &sd).scale(sq * xi.conj());
            }
            if p > 0 {
                out = &out + &(&(s * y.component(p - 1, q)) * &ld).scale(sp * xi);
            }
            if p > 0 && q > 0 {
                out = &out + &(&(s * y.component(p - 1, q - 1)) * &sd).scale(Complex64::new(sp * sq * xi.norm_sqr(), 0.0));
            }
            out
        })
    }

    /// Euler–Maruyama homodyne update with measured increment `dy`.
    pub fn homodyne_step(&self, y: &mut FockLadder, t: f64, dt: f64, dy: f64) {
        let drift = self.rhs(y, t);
        let gain = self.gain(y, t);
        let m = gain.top().trace().re;
        let w = dy - m * dt;
        *y = y.map(|p, q| {
            let rho = y.component(p, q);
            let g = gain.component(p, q) - &rho.scale(Complex64::new(m, 0.0));
            &(rho + &drift.component(p, q).scale(Complex64::new(dt, 0.0))) + &g.scale(Complex64::new(w, 0.0))
        });
    }

    /// Counting update: collapse on a detection, otherwise the no-click drift.
    pub fn photocount_step(&self, y: &mut FockLadder, t: f64, dt: f64, jumped: bool) -> Result<()> {
        let j = self.jump(y, t);
        let rate = j.top().trace().re;
        if jumped {
            if rate < crate::photocount::RATE_FLOOR {
                return Err(Error::JumpAtVanishingRate { t, rate });
            }
            *y = j.map(|p, q| j.component(p, q).scale(Complex64::new(1.0 / rate, 0.0)));
        } else {
            let drift = self.rhs(y, t);
            *y = y.map(|p, q| {
                let rho = y.component(p, q);
                let k = &(drift.component(p, q) - j.component(p, q)) + &rho.scale(Complex64::new(rate, 0.0));
                rho + &k.scale(Complex64::new(dt, 0.0))
            });
        }
        Ok(())
    }
}
