//! Self-checks that compare the production code paths against independent
//! formulations: duality of the generators, adjointness of the jump map,
//! permanent normalizations against a Wick expansion, and the general
//! hierarchy against the single-shape photon ladder.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fock::{FockEngine, FockLadder};
use crate::hierarchy::DensityHierarchy;
use crate::homodyne::{FilterOptions, HomodyneFilter};
use crate::master::{step_count, MasterEngine};
use crate::matrix::ComplexMatrix;
use crate::model::SystemModel;
use crate::noise;
use crate::photocount::PhotocountFilter;
use crate::photon::{vacuum_expectation, PhotonState, PulseSet, PulseShape, SubsetIndex, SubsetOrder};
use crate::presets::atom_model;
use crate::superop::verify_duality_with;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Self { name: name.into(), deviation, tolerance }
    }

    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "ok  " } else { "FAIL" };
        write!(f, "{status} {:<44} deviation {:.3e} (tolerance {:.0e})", self.name, self.deviation, self.tolerance)
    }
}

/// Which conditional evolution to compare, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evolution {
    Master,
    Homodyne { seed: u64 },
    Photocount { seed: u64 },
}

/// Random system with `S` unitary, unit-scale `L`, Hermitian `H` and a
/// random pure initial state.
pub fn random_model<R: Rng + ?Sized>(d: usize, rng: &mut R) -> SystemModel {
    let s = ComplexMatrix::random_unitary(d, rng);
    let l = ComplexMatrix::random(d, d, rng);
    let h = ComplexMatrix::random_hermitian(d, rng);
    let v: Vec<Complex64> = (0..d)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    SystemModel::new(s, l, h, v.into_iter().map(|z| z / norm).collect()).expect("random model is valid")
}

/// Hierarchy with arbitrary unit-scale entries (Hermitian diagonal pairs).
pub fn random_hierarchy<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> DensityHierarchy {
    let mut h = DensityHierarchy::zeros(n, d);
    for z in h.as_mut_slice() {
        *z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    for i in 0..(1usize << n) {
        let p = h.pair_index(i, i);
        let b = h.block_mut(p);
        for r in 0..d {
            for c in 0..r {
                b[r * d + c] = b[c * d + r].conj();
            }
            b[r * d + r].im = 0.0;
        }
    }
    h
}

/// Gaussian envelopes with a linear phase, tabulated so they are complex.
pub fn chirped_pulses(params: &[(f64, f64, f64)], dt: f64) -> Result<PulseSet> {
    let shapes = params
        .iter()
        .map(|&(omega, center, k)| {
            let end = center + 7.0 / omega;
            let times: Vec<f64> = (0..=(end / 0.005) as usize).map(|m| m as f64 * 0.005).collect();
            let amp = (omega * omega / (2.0 * std::f64::consts::PI)).powf(0.25);
            let values = times
                .iter()
                .map(|&t| Complex64::from_polar(amp * (-omega * omega * (t - center).powi(2) / 4.0).exp(), k * t))
                .collect();
            PulseShape::Tabulated { times, values }
        })
        .collect();
    PulseSet::new(shapes, dt, 0.0)
}

/// The counting-gain functional on the observable side,
/// `Δ^{l;r}(X) = π^{l;r}(L†XL) + Σ_μ c_μ(r) π^{l;r∪μ}(L†XS)
///  + Σ_ν c_ν(l)* π^{l∪ν;r}(S†XL) + Σ_ν Σ_μ c_ν(l)* c_μ(r) π^{l∪ν;r∪μ}(S†XS)`
/// where `π^{l;r}(Y) = Tr[(ρ^{l;r})† Y]`.
#[allow(clippy::too_many_arguments)]
pub fn counting_functional(
    model: &SystemModel,
    photons: &PhotonState,
    h: &DensityHierarchy,
    l: &SubsetIndex,
    r: &SubsetIndex,
    t: f64,
    x: &ComplexMatrix,
) -> Result<Complex64> {
    model.check_operand("X", x)?;
    let (lo, s) = (model.coupling(), model.scattering());
    let (ld, sd) = (lo.adjoint(), s.adjoint());
    let pi = |a: &SubsetIndex, b: &SubsetIndex, y: &ComplexMatrix| h.component(a, b).map(|m| m.hs_inner(y));
    let (lx, sx) = (&ld * x, &sd * x);
    let mut total = pi(l, r, &(&lx * lo))?;
    let cl = photons.annihilation_coefficients(l, t);
    let cr = photons.annihilation_coefficients(r, t);
    let lxs = &lx * s;
    for &(mu, c) in &cr {
        total += c * pi(l, &r.with(mu), &lxs)?;
    }
    let sxl = &sx * lo;
    for &(nu, c) in &cl {
        total += c.conj() * pi(&l.with(nu), r, &sxl)?;
    }
    let sxs = &sx * s;
    for &(nu, a) in &cl {
        for &(mu, b) in &cr {
            total += a.conj() * b * pi(&l.with(nu), &r.with(mu), &sxs)?;
        }
    }
    Ok(total)
}

/// Largest `|Tr[𝒟_{jk}'(ρ)† X] − Tr[ρ† ℒ_{jk}(X)]|` over random models.
pub fn duality_deviation(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let model = if trial == 0 { atom_model() } else { random_model(2 + trial % 3, &mut rng) };
        let report = verify_duality_with(&model, 1, rng.random(), |k, m| {
            crate::superop::apply_schrodinger(k, &model, m).expect("operand has system dimension")
        });
        worst = worst.max(report.max_deviation);
    }
    worst
}

/// Largest `|Tr[𝒥^{l;r}(ρ)† X] − Δ^{l;r}(X)|` over random inputs and all pairs.
pub fn adjointness_deviation(trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let model = random_model(2 + trial % 2, &mut rng);
        let k1: f64 = rng.random_range(-1.0..1.0);
        let photons = PhotonState::new(chirped_pulses(&[(1.46, 3.0, k1), (2.2, 3.4, 0.5)], 1e-3)?);
        let h = random_hierarchy(2, model.dim(), &mut rng);
        let x = ComplexMatrix::random(model.dim(), model.dim(), &mut rng);
        let t = rng.random_range(1.5..5.0);
        let mut filter = PhotocountFilter::new(&model, &photons, FilterOptions::default());
        for l in photons.order().iter() {
            for r in photons.order().iter() {
                let lhs = filter.delta_dual(&h, &l, &r, t)?.hs_inner(&x);
                let rhs = counting_functional(&model, &photons, &h, &l, &r, t, &x)?;
                worst = worst.max((lhs - rhs).norm());
            }
        }
    }
    Ok(worst)
}

/// Largest relative gap between the permanent normalization and the Wick
/// expansion, over every subset of several pulse families with `n ≤ 4`.
pub fn normalization_deviation() -> Result<f64> {
    let families: [&[(f64, f64, f64)]; 4] = [
        &[(1.46, 3.0, 0.0), (2.92, 3.5, 0.0)],
        &[(1.46, 3.0, 0.4), (2.0, 3.2, -0.8), (1.7, 4.1, 0.0)],
        &[(1.46, 3.0, 0.0), (1.46, 3.0, 0.0), (1.46, 3.0, 0.0), (1.46, 3.0, 0.0)],
        &[(1.46, 3.0, 1.1), (2.92, 3.6, 0.0), (1.0, 5.0, -0.3), (2.0, 4.0, 0.6)],
    ];
    let mut worst = 0.0f64;
    for params in families {
        let photons = PhotonState::new(chirped_pulses(params, 1e-3)?);
        for r in photons.order().iter() {
            let comp: Vec<usize> = r.complement().iter().map(|m| m - 1).collect();
            let w = vacuum_expectation(photons.gram(), &comp, &comp);
            let n = photons.normalization(&r);
            worst = worst.max((w - n).norm() / n.max(1.0));
        }
    }
    Ok(worst)
}

/// `|N_∅ − (1 + |⟨ξ₁|ξ₂⟩|²)|` for two photons.
pub fn two_photon_normalization_deviation() -> Result<f64> {
    let photons = PhotonState::new(PulseSet::gaussians(&[(1.46, 3.0), (2.92, 3.8)], 1e-3, 0.0)?);
    let s = photons.gram()[(0, 1)];
    Ok((photons.normalization(&SubsetIndex::empty(2)) - (1.0 + s.norm_sqr())).abs())
}

/// Number of subsets whose rank does not round-trip, over `n ≤ 10`.
pub fn rank_failures() -> usize {
    (0..=crate::photon::MAX_PHOTONS)
        .map(|n| {
            let order = SubsetOrder::new(n);
            (0..order.len())
                .filter(|&idx| {
                    let s = order.subset(idx);
                    s.rank() != idx + 1 || SubsetIndex::from_rank(n, idx + 1).ok() != Some(s)
                })
                .count()
        })
        .sum()
}

/// Runs the general hierarchy for `n` identical pulses and the photon ladder
/// side by side over `[0, t_final]`, feeding both the same measurement
/// record, and returns the largest componentwise difference seen.
pub fn fock_reduction_deviation(
    model: &SystemModel,
    shape: (f64, f64),
    n: usize,
    t_final: f64,
    dt: f64,
    evolution: Evolution,
) -> Result<f64> {
    let steps = step_count(t_final, dt)?;
    let pulses = PulseSet::gaussians(&vec![shape; n], dt, t_final)?;
    let photons = PhotonState::new(pulses.clone());
    let single = PulseSet::gaussians(&[shape], dt, t_final)?;
    let ladder_engine = FockEngine::new(model, &single, n)?;

    let mut h = DensityHierarchy::initial(model, &photons);
    let mut y = FockLadder::initial(model, n);
    let order = photons.order();
    let compare = |h: &DensityHierarchy, y: &FockLadder| {
        let mut worst = 0.0f64;
        for (i, j) in h.pair_list() {
            let (l, r) = (order.subset(i), order.subset(j));
            let (p, q) = (n - l.len(), n - r.len());
            worst = worst.max(h.component_at(i, j).max_abs_diff(y.component(p, q)));
        }
        worst
    };
    let mut worst = compare(&h, &y);
    let mut master = MasterEngine::new(model, &photons);
    let mut homodyne = HomodyneFilter::new(model, &photons, FilterOptions::default());
    let mut counting = PhotocountFilter::new(model, &photons, FilterOptions::default());
    for m in 0..steps {
        let t = m as f64 * dt;
        match evolution {
            Evolution::Master => {
                master.step(&mut h, t, dt);
                ladder_engine.rk4_step(&mut y, t, dt);
            }
            Evolution::Homodyne { seed } => {
                let dy = homodyne.step_with(&mut h, t, dt, |rate| rate * dt + noise::wiener_increment(seed, m, dt));
                ladder_engine.homodyne_step(&mut y, t, dt, dy);
            }
            Evolution::Photocount { seed } => {
                let (jumped, _) = counting.step_with(&mut h, t, dt, |rate| noise::uniform(seed, m) < rate * dt)?;
                ladder_engine.photocount_step(&mut y, t, dt, jumped)?;
            }
        }
        worst = worst.max(compare(&h, &y));
        if !worst.is_finite() {
            return Ok(f64::INFINITY);
        }
    }
    Ok(worst)
}

/// The full suite, as run by `photonfilter validate`.
pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = vec![
        Check::new("generator duality (100 random inputs)", duality_deviation(100, rng.random()), 1e-12),
        Check::new("jump map adjointness (100 random inputs)", adjointness_deviation(100, rng.random())?, 1e-12),
        Check::new("permanent vs Wick normalization, n <= 4", normalization_deviation()?, 1e-10),
        Check::new("two-photon normalization 1 + |<x1|x2>|^2", two_photon_normalization_deviation()?, 1e-12),
        Check::new("subset rank round trip, n <= 10", rank_failures() as f64, 0.0),
    ];
    let counts = [(0, 1), (1, 3), (2, 10), (3, 36)]
        .iter()
        .filter(|&&(n, want)| DensityHierarchy::zeros(n, 1).component_count() != want)
        .count();
    checks.push(Check::new("hierarchy sizes 1/3/10/36", counts as f64, 0.0));

    let model = random_model(2, &mut rng);
    let atom = atom_model();
    for n in [2, 3] {
        checks.push(Check::new(
            format!("photon ladder, master, n = {n}"),
            fock_reduction_deviation(&model, (1.46, 3.0), n, 8.0, 1e-3, Evolution::Master)?,
            1e-8,
        ));
        checks.push(Check::new(
            format!("photon ladder, homodyne record, n = {n}"),
            fock_reduction_deviation(&atom, (2.92, 3.0), n, 8.0, 1e-3, Evolution::Homodyne { seed })?,
            1e-8,
        ));
        checks.push(Check::new(
            format!("photon ladder, counting record, n = {n}"),
            fock_reduction_deviation(&atom, (2.92, 3.0), n, 8.0, 1e-3, Evolution::Photocount { seed })?,
            1e-8,
        ));
    }
    Ok(checks)
}
