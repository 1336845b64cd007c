//! Conditional evolution under photon counting: smooth no-detection
//! evolution punctuated by jumps.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hierarchy::{DensityHierarchy, Terms};
use crate::homodyne::{sample, FilterOptions, FilterStats};
use crate::master::step_count;
use crate::matrix::{kernel, ComplexMatrix, ZERO};
use crate::model::SystemModel;
use crate::noise;
use crate::photon::{PhotonState, SubsetIndex};

/// Rates below this cannot produce a detection.
pub const RATE_FLOOR: f64 = 1e-12;

/// Per-step jump probabilities above this make the Bernoulli sampling coarse.
pub const COARSE_STEP_PROBABILITY: f64 = 0.1;

/// One counting trajectory, sampled at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpRecord {
    pub seed: Option<u64>,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Left edge of the step in which each detection happened.
    pub jump_times: Vec<f64>,
    /// Cumulative detections `N(t)` per grid point.
    pub counts: Vec<u32>,
    pub conditional: Vec<Vec<f64>>,
    pub trace_drift: Vec<f64>,
    /// Largest `λ_t dt` encountered; above [`COARSE_STEP_PROBABILITY`] the
    /// time step is too long for the rate.
    pub max_jump_probability: f64,
    pub stats: FilterStats,
}

pub struct PhotocountFilter<'a> {
    terms: Terms<'a>,
    drift: Vec<Complex64>,
    jump: Vec<Complex64>,
    options: FilterOptions,
    stats: FilterStats,
}

impl<'a> PhotocountFilter<'a> {
    pub fn new(model: &SystemModel, photons: &'a PhotonState, options: FilterOptions) -> Self {
        let len = DensityHierarchy::zeros(photons.n(), model.dim()).as_slice().len();
        Self {
            terms: Terms::new(model, photons),
            drift: vec![ZERO; len],
            jump: vec![ZERO; len],
            options,
            stats: FilterStats::default(),
        }
    }

    pub fn stats(&self) -> &FilterStats {
        &self.stats
    }

    /// `𝒥^{l;r} = Lρ^{l;r}L† + Σ_μ c_μ(r)* Lρ^{l;r∪μ}S† + Σ_ν c_ν(l) Sρ^{l∪ν;r}L†
    ///           + Σ_ν Σ_μ c_ν(l) c_μ(r)* Sρ^{l∪ν;r∪μ}S†`
    pub fn delta_dual(&mut self, h: &DensityHierarchy, l: &SubsetIndex, r: &SubsetIndex, t: f64) -> Result<ComplexMatrix> {
        let d = h.dim();
        h.component(l, r)?;
        self.terms.load(h, t);
        self.terms.assemble(l.rank() - 1, r.rank() - 1);
        let mut out = vec![ZERO; d * d];
        self.terms.jump(&mut out);
        ComplexMatrix::from_vec(d, d, out)
    }

    /// Fills drift and jump maps of every pair; returns `λ_t = Re Tr 𝒥^{∅;∅}`.
    fn prepare(&mut self, h: &DensityHierarchy, t: f64) -> f64 {
        let dd = h.dim() * h.dim();
        self.terms.load(h, t);
        for (p, (i, j)) in h.pair_list().into_iter().enumerate() {
            self.terms.assemble(i, j);
            self.terms.drift(&mut self.drift[p * dd..(p + 1) * dd]);
            self.terms.jump(&mut self.jump[p * dd..(p + 1) * dd]);
        }
        kernel::trace(h.dim(), &self.jump[..dd]).re
    }

    /// Detection rate `λ_t` at `t`.
    pub fn rate(&mut self, h: &DensityHierarchy, t: f64) -> f64 {
        self.prepare(h, t)
    }

    fn apply(&mut self, h: &mut DensityHierarchy, t: f64, dt: f64, jumped: bool, rate: f64) -> Result<()> {
        if jumped {
            if rate < RATE_FLOOR {
                return Err(Error::JumpAtVanishingRate { t, rate });
            }
            for (y, j) in h.as_mut_slice().iter_mut().zip(&self.jump) {
                *y = j / rate;
            }
        } else {
            for ((y, f), j) in h.as_mut_slice().iter_mut().zip(&self.drift).zip(&self.jump) {
                *y += (f - (j - *y * rate)) * dt;
            }
        }
        if self.options.renormalize {
            let tr = h.top_trace().re;
            h.scale(1.0 / tr);
            self.stats.renormalizations += 1;
        }
        Ok(())
    }

    /// Advance over `[t, t + dt)` given whether a detection occurred.
    pub fn step(&mut self, h: &mut DensityHierarchy, t: f64, dt: f64, jumped: bool) -> Result<()> {
        self.step_with(h, t, dt, |_| jumped).map(|_| ())
    }

    /// As [`step`](Self::step), deciding the detection after seeing `λ_t`.
    /// Returns `(jumped, λ_t)`.
    pub fn step_with(&mut self, h: &mut DensityHierarchy, t: f64, dt: f64, jumped: impl FnOnce(f64) -> bool) -> Result<(bool, f64)> {
        let rate = self.prepare(h, t);
        let jumped = jumped(rate);
        self.apply(h, t, dt, jumped, rate)?;
        Ok((jumped, rate))
    }
}

/// Runs a counting trajectory. `detect(step, λ_t)` decides whether a
/// detection happens in each step; `observe(step, t, h, count)` sees every
/// grid point. Returns the final hierarchy, the detection count and the
/// largest `λ_t dt`.
pub fn run_photocount(
    model: &SystemModel,
    photons: &PhotonState,
    t_final: f64,
    dt: f64,
    options: FilterOptions,
    mut detect: impl FnMut(usize, f64) -> bool,
    mut observe: impl FnMut(usize, f64, &DensityHierarchy, u32),
) -> Result<(DensityHierarchy, u32, f64, FilterStats)> {
    let steps = step_count(t_final, dt)?;
    let mut filter = PhotocountFilter::new(model, photons, options);
    let mut h = DensityHierarchy::initial(model, photons);
    let mut count = 0u32;
    let mut max_p = 0.0f64;
    observe(0, 0.0, &h, 0);
    for m in 0..steps {
        let t = m as f64 * dt;
        let (jumped, rate) = filter.step_with(&mut h, t, dt, |rate| detect(m, rate))?;
        max_p = max_p.max(rate * dt);
        if jumped {
            count += 1;
        }
        if !h.is_finite() {
            return Err(Error::NumericalAbort {
                step: m + 1,
                t: t + dt,
                reason: format!("non-finite entry in the conditional hierarchy (rate {rate:e})"),
            });
        }
        observe(m + 1, (m + 1) as f64 * dt, &h, count);
    }
    Ok((h, count, max_p, filter.stats))
}

/// Synthesizes detections: a jump in step `m` with probability `λ_t dt`.
pub fn simulate_photocount(
    model: &SystemModel,
    photons: &PhotonState,
    observables: &[ComplexMatrix],
    t_final: f64,
    dt: f64,
    seed: u64,
    options: FilterOptions,
) -> Result<JumpRecord> {
    record(model, photons, observables, t_final, dt, Some(seed), options, |m, rate| {
        noise::uniform(seed, m) < rate * dt
    })
}

/// Filters an external list of detection times. Each time is assigned to the
/// step containing it; at most one detection per step.
pub fn replay_photocount(
    model: &SystemModel,
    photons: &PhotonState,
    observables: &[ComplexMatrix],
    jump_times: &[f64],
    t_final: f64,
    dt: f64,
    options: FilterOptions,
) -> Result<JumpRecord> {
    let steps = step_count(t_final, dt)?;
    let mut marks = vec![false; steps];
    let mut prev = f64::NEG_INFINITY;
    for &t in jump_times {
        if !(t > prev) || t < 0.0 || t > t_final {
            return Err(Error::InvalidArgument(format!(
                "jump time {t} is out of order or outside [0, {t_final}]"
            )));
        }
        prev = t;
        let m = ((t / dt + 1e-9).floor() as usize).min(steps.saturating_sub(1));
        if marks[m] {
            return Err(Error::InvalidArgument(format!("two jumps fall in the step starting at {}", m as f64 * dt)));
        }
        marks[m] = true;
    }
    record(model, photons, observables, t_final, dt, None, options, |m, _| marks[m])
}

#[allow(clippy::too_many_arguments)]
fn record(
    model: &SystemModel,
    photons: &PhotonState,
    observables: &[ComplexMatrix],
    t_final: f64,
    dt: f64,
    seed: Option<u64>,
    options: FilterOptions,
    mut detect: impl FnMut(usize, f64) -> bool,
) -> Result<JumpRecord> {
    for x in observables {
        model.check_operand("observable", x)?;
    }
    let steps = step_count(t_final, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut conditional = vec![Vec::with_capacity(steps + 1); observables.len()];
    let mut trace_drift = Vec::with_capacity(steps + 1);
    let mut counts = Vec::with_capacity(steps + 1);
    let mut jump_times = Vec::new();
    let (_, _, max_jump_probability, stats) = run_photocount(
        model,
        photons,
        t_final,
        dt,
        options,
        |m, rate| {
            let j = detect(m, rate);
            if j {
                jump_times.push(m as f64 * dt);
            }
            j
        },
        |_, t, h, n| {
            sample(&mut times, &mut conditional, &mut trace_drift, observables, t, h);
            counts.push(n);
        },
    )?;
    Ok(JumpRecord {
        seed,
        dt,
        times,
        jump_times,
        counts,
        conditional,
        trace_drift,
        max_jump_probability,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ONE;
    use crate::photon::PulseSet;
    use crate::presets::{excited_projector, preset};
    use crate::testing::{chirped_pulses, decaying_qubit, random_hierarchy, random_model};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `Δ^{l;r}(X)` written on the observable side:
    /// `π^{l;r}(L†XL) + Σ_μ c_μ(r) π^{l;r∪μ}(L†XS) + Σ_ν c_ν(l)* π^{l∪ν;r}(S†XL)
    ///  + Σ_ν Σ_μ c_ν(l)* c_μ(r) π^{l∪ν;r∪μ}(S†XS)`, with `π^{l;r}(Y) = Tr[(ρ^{l;r})† Y]`.
    fn delta(
        model: &SystemModel,
        photons: &PhotonState,
        h: &DensityHierarchy,
        l: &SubsetIndex,
        r: &SubsetIndex,
        t: f64,
        x: &ComplexMatrix,
    ) -> Complex64 {
        let (lo, s) = (model.coupling(), model.scattering());
        let (ld, sd) = (lo.adjoint(), s.adjoint());
        let pi = |a: &SubsetIndex, b: &SubsetIndex, y: &ComplexMatrix| h.component(a, b).unwrap().hs_inner(y);
        let lxl = &(&ld * x) * lo;
        let lxs = &(&ld * x) * s;
        let sxl = &(&sd * x) * lo;
        let sxs = &(&sd * x) * s;
        let mut total = pi(l, r, &lxl);
        let cl = photons.annihilation_coefficients(l, t);
        let cr = photons.annihilation_coefficients(r, t);
        for &(mu, c) in &cr {
            total += c * pi(l, &r.with(mu), &lxs);
        }
        for &(nu, c) in &cl {
            total += c.conj() * pi(&l.with(nu), r, &sxl);
        }
        for &(nu, a) in &cl {
            for &(mu, b) in &cr {
                total += a.conj() * b * pi(&l.with(nu), &r.with(mu), &sxs);
            }
        }
        total
    }

    #[test]
    fn jump_map_is_adjoint_of_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xad10);
        let mut worst = 0.0f64;
        for trial in 0..100u64 {
            let model = random_model(2 + (trial % 2) as usize, trial);
            let photons = PhotonState::new(chirped_pulses(&[(1.46, 3.0, 0.8), (2.2, 3.4, -0.3)]));
            let h = random_hierarchy(2, model.dim(), trial + 1000);
            let x = ComplexMatrix::random(model.dim(), model.dim(), &mut rng);
            let t: f64 = rng.random_range(1.5..5.0);
            let mut f = PhotocountFilter::new(&model, &photons, FilterOptions::default());
            for l in photons.order().iter() {
                for r in photons.order().iter() {
                    let j = f.delta_dual(&h, &l, &r, t).unwrap();
                    let lhs = j.hs_inner(&x);
                    let rhs = delta(&model, &photons, &h, &l, &r, t, &x);
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
        assert!(worst < 1e-12, "{worst:e}");
    }

    #[test]
    fn vacuum_jump_is_standard_collapse() {
        let model = decaying_qubit(vec![ONE, ZERO]);
        let photons = PhotonState::new(PulseSet::new(vec![], 1e-3, 1.0).unwrap());
        let mut f = PhotocountFilter::new(&model, &photons, FilterOptions::default());
        let mut h = DensityHierarchy::initial(&model, &photons);
        let e = SubsetIndex::empty(0);
        let j = f.delta_dual(&h, &e, &e, 0.0).unwrap();
        let l = model.coupling();
        assert!(j.max_abs_diff(&(&(l * &h.top()) * &l.adjoint())) < 1e-15);
        assert!((f.rate(&h, 0.0) - 1.0).abs() < 1e-15);
        f.step(&mut h, 0.0, 1e-3, true).unwrap();
        let g = ComplexMatrix::from_real(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert!(h.top().max_abs_diff(&g) < 1e-15);
        // nothing left to emit
        assert!(f.rate(&h, 0.0).abs() < 1e-15);
        let err = f.step(&mut h, 0.0, 1e-3, true).unwrap_err();
        assert!(matches!(err, Error::JumpAtVanishingRate { .. }));
    }

    #[test]
    fn ground_state_never_clicks() {
        let model = decaying_qubit(vec![ZERO, ONE]);
        let photons = PhotonState::new(PulseSet::new(vec![], 1e-3, 1.0).unwrap());
        let rec = simulate_photocount(&model, &photons, &[excited_projector()], 5.0, 1e-3, 3, FilterOptions::default()).unwrap();
        assert!(rec.jump_times.is_empty());
        assert_eq!(rec.max_jump_probability, 0.0);
    }

    #[test]
    fn vacuum_pair_has_only_coupling_term() {
        let model = decaying_qubit(vec![ZERO, ONE]);
        let photons = PhotonState::new(chirped_pulses(&[(1.46, 3.0, 0.0), (2.0, 3.3, 0.0)]));
        let mut f = PhotocountFilter::new(&model, &photons, FilterOptions::default());
        let h = random_hierarchy(2, 2, 2);
        let full = SubsetIndex::full(2);
        let j = f.delta_dual(&h, &full, &full, 3.0).unwrap();
        let l = model.coupling();
        let rho = h.component(&full, &full).unwrap();
        assert!(j.max_abs_diff(&(&(l * &rho) * &l.adjoint())) < 1e-15);
    }

    #[test]
    fn seeded_runs_repeat_and_replay() {
        let p = preset("b").unwrap();
        let (model, photons) = (p.model(), p.photons(1e-3).unwrap());
        let obs = [excited_projector()];
        let opts = FilterOptions::default();
        let a = simulate_photocount(&model, &photons, &obs, 10.0, 1e-3, 5, opts).unwrap();
        let b = simulate_photocount(&model, &photons, &obs, 10.0, 1e-3, 5, opts).unwrap();
        assert_eq!(a, b);
        assert!(a.jump_times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*a.counts.last().unwrap() as usize, a.jump_times.len());
        let c = replay_photocount(&model, &photons, &obs, &a.jump_times, 10.0, 1e-3, opts).unwrap();
        assert_eq!(a.conditional, c.conditional);
        assert!(replay_photocount(&model, &photons, &obs, &[2.0, 1.0], 10.0, 1e-3, opts).is_err());
    }

    #[test]
    fn trace_preserved_between_jumps() {
        let p = preset("a").unwrap();
        let (model, photons) = (p.model(), p.photons(1e-4).unwrap());
        for seed in 0..3 {
            let rec = simulate_photocount(&model, &photons, &[], 10.0, 1e-4, seed, FilterOptions::default()).unwrap();
            let worst = rec.trace_drift.iter().copied().fold(0.0, f64::max);
            assert!(worst < 1e-4, "seed {seed}: {worst:e}");
        }
    }
}
