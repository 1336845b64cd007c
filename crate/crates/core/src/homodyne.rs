//! Conditional evolution under continuous homodyne detection of `B + B†`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hierarchy::{DensityHierarchy, Terms};
use crate::master::step_count;
use crate::matrix::{kernel, ComplexMatrix, ZERO};
use crate::model::SystemModel;
use crate::noise;
use crate::photon::{PhotonState, SubsetIndex};

/// Knobs shared by both detection schemes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FilterOptions {
    /// Divide every pair by `Re Tr ρ^{∅;∅}` after each step. Off by default:
    /// the filter preserves the trace analytically and this only trims
    /// discretization drift.
    pub renormalize: bool,
}

/// Diagnostics gathered while stepping.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilterStats {
    pub renormalizations: usize,
    /// Largest `|Im Tr S̄^{∅;∅}|` seen, which should be rounding noise.
    pub max_gain_imag: f64,
}

/// One homodyne trajectory, sampled at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: Option<u64>,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Measured increment over `[t_m, t_m + dt)`; one shorter than `times`.
    pub dy: Vec<f64>,
    /// `Re Tr[ρ^{∅;∅} X_k]` per observable per grid point.
    pub conditional: Vec<Vec<f64>>,
    /// `|Tr ρ^{∅;∅} − 1|` per grid point.
    pub trace_drift: Vec<f64>,
    pub stats: FilterStats,
}

pub struct HomodyneFilter<'a> {
    terms: Terms<'a>,
    drift: Vec<Complex64>,
    gain: Vec<Complex64>,
    options: FilterOptions,
    stats: FilterStats,
}

impl<'a> HomodyneFilter<'a> {
    pub fn new(model: &SystemModel, photons: &'a PhotonState, options: FilterOptions) -> Self {
        let len = DensityHierarchy::zeros(photons.n(), model.dim()).as_slice().len();
        Self {
            terms: Terms::new(model, photons),
            drift: vec![ZERO; len],
            gain: vec![ZERO; len],
            options,
            stats: FilterStats::default(),
        }
    }

    pub fn stats(&self) -> &FilterStats {
        &self.stats
    }

    /// `S̄^{l;r} = Lρ^{l;r} + ρ^{l;r}L† + Σ_μ c_μ(r)* ρ^{l;r∪μ} S† + Σ_ν c_ν(l) S ρ^{l∪ν;r}`
    pub fn sbar(&mut self, h: &DensityHierarchy, l: &SubsetIndex, r: &SubsetIndex, t: f64) -> Result<ComplexMatrix> {
        let d = h.dim();
        h.component(l, r)?;
        let (i, j) = (l.rank() - 1, r.rank() - 1);
        self.terms.load(h, t);
        self.terms.assemble(i, j);
        let mut out = vec![ZERO; d * d];
        self.terms.gain(&mut out);
        ComplexMatrix::from_vec(d, d, out)
    }

    /// Fills the drift and gain of every pair; returns `Tr S̄^{∅;∅}`.
    fn prepare(&mut self, h: &DensityHierarchy, t: f64) -> Complex64 {
        let dd = h.dim() * h.dim();
        self.terms.load(h, t);
        for (p, (i, j)) in h.pair_list().into_iter().enumerate() {
            self.terms.assemble(i, j);
            self.terms.drift(&mut self.drift[p * dd..(p + 1) * dd]);
            self.terms.gain(&mut self.gain[p * dd..(p + 1) * dd]);
        }
        kernel::trace(h.dim(), &self.gain[..dd])
    }

    /// `m_t = Re Tr S̄^{∅;∅}`, the expected measurement rate at `t`.
    pub fn mean_rate(&mut self, h: &DensityHierarchy, t: f64) -> f64 {
        self.prepare(h, t).re
    }

    fn apply(&mut self, h: &mut DensityHierarchy, dt: f64, dy: f64, m: f64) {
        let innovation = dy - m * dt;
        for ((y, f), g) in h.as_mut_slice().iter_mut().zip(&self.drift).zip(&self.gain) {
            *y += f * dt + (g - *y * m) * innovation;
        }
        if self.options.renormalize {
            let tr = h.top_trace().re;
            h.scale(1.0 / tr);
            self.stats.renormalizations += 1;
        }
    }

    /// Euler–Maruyama step over `[t, t + dt)` given the measured increment.
    pub fn step(&mut self, h: &mut DensityHierarchy, t: f64, dt: f64, dy: f64) {
        self.step_with(h, t, dt, |_| dy);
    }

    /// As [`step`](Self::step), with the increment chosen after seeing `m_t`.
    /// Returns the increment used.
    pub fn step_with(&mut self, h: &mut DensityHierarchy, t: f64, dt: f64, dy: impl FnOnce(f64) -> f64) -> f64 {
        let tr = self.prepare(h, t);
        self.stats.max_gain_imag = self.stats.max_gain_imag.max(tr.im.abs());
        let m = tr.re;
        let dy = dy(m);
        self.apply(h, dt, dy, m);
        dy
    }
}

/// Runs a trajectory from the initial hierarchy. `increment(step, m_t)`
/// supplies the measured `dY` for each step; `observe(step, t, h)` sees
/// every grid point including `t = 0`.
pub fn run_homodyne(
    model: &SystemModel,
    photons: &PhotonState,
    t_final: f64,
    dt: f64,
    options: FilterOptions,
    mut increment: impl FnMut(usize, f64) -> f64,
    mut observe: impl FnMut(usize, f64, &DensityHierarchy),
) -> Result<(DensityHierarchy, FilterStats)> {
    let steps = step_count(t_final, dt)?;
    let mut filter = HomodyneFilter::new(model, photons, options);
    let mut h = DensityHierarchy::initial(model, photons);
    observe(0, 0.0, &h);
    for m in 0..steps {
        let t = m as f64 * dt;
        filter.step_with(&mut h, t, dt, |rate| increment(m, rate));
        if !h.is_finite() {
            return Err(Error::NumericalAbort {
                step: m + 1,
                t: t + dt,
                reason: "non-finite entry in the conditional hierarchy".into(),
            });
        }
        observe(m + 1, (m + 1) as f64 * dt, &h);
    }
    Ok((h, filter.stats))
}

/// Synthesizes a record `dY = m_t dt + dW` with `dW` drawn from `seed`.
pub fn simulate_homodyne(
    model: &SystemModel,
    photons: &PhotonState,
    observables: &[ComplexMatrix],
    t_final: f64,
    dt: f64,
    seed: u64,
    options: FilterOptions,
) -> Result<TrajectoryRecord> {
    record(model, photons, observables, t_final, dt, Some(seed), options, |m, rate| {
        rate * dt + noise::wiener_increment(seed, m, dt)
    })
}

/// Filters an externally supplied record of increments, one per step.
pub fn replay_homodyne(
    model: &SystemModel,
    photons: &PhotonState,
    observables: &[ComplexMatrix],
    dy: &[f64],
    t_final: f64,
    dt: f64,
    options: FilterOptions,
) -> Result<TrajectoryRecord> {
    let steps = step_count(t_final, dt)?;
    if dy.len() != steps {
        return Err(Error::ReplayLength { expected: steps, found: dy.len() });
    }
    record(model, photons, observables, t_final, dt, None, options, |m, _| dy[m])
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
    mut increment: impl FnMut(usize, f64) -> f64,
) -> Result<TrajectoryRecord> {
    for x in observables {
        model.check_operand("observable", x)?;
    }
    let steps = step_count(t_final, dt)?;
    let mut rec = TrajectoryRecord {
        seed,
        dt,
        times: Vec::with_capacity(steps + 1),
        dy: Vec::with_capacity(steps),
        conditional: vec![Vec::with_capacity(steps + 1); observables.len()],
        trace_drift: Vec::with_capacity(steps + 1),
        stats: FilterStats::default(),
    };
    let mut dys = Vec::with_capacity(steps);
    let (_, stats) = run_homodyne(
        model,
        photons,
        t_final,
        dt,
        options,
        |m, rate| {
            let v = increment(m, rate);
            dys.push(v);
            v
        },
        |_, t, h| sample(&mut rec.times, &mut rec.conditional, &mut rec.trace_drift, observables, t, h),
    )?;
    rec.dy = dys;
    rec.stats = stats;
    Ok(rec)
}

pub(crate) fn sample(
    times: &mut Vec<f64>,
    conditional: &mut [Vec<f64>],
    trace_drift: &mut Vec<f64>,
    observables: &[ComplexMatrix],
    t: f64,
    h: &DensityHierarchy,
) {
    let d = h.dim();
    let top = &h.as_slice()[..d * d];
    times.push(t);
    for (series, x) in conditional.iter_mut().zip(observables) {
        series.push(kernel::hs_inner(top, x.as_slice()).re);
    }
    trace_drift.push((kernel::trace(d, top) - 1.0).norm());
}
