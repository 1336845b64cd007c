//! Many independent trajectories, run in parallel and averaged in a fixed
//! order so the result does not depend on scheduling.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hierarchy::DensityHierarchy;
use crate::homodyne::{run_homodyne, FilterOptions};
use crate::master::{integrate_master_with, step_count};
use crate::matrix::{kernel, ComplexMatrix, ZERO};
use crate::model::SystemModel;
use crate::noise;
use crate::photocount::run_photocount;
use crate::photon::PhotonState;

/// Trajectories are farmed out in blocks of this size and folded in index
/// order; the block size is fixed so the summation order never changes.
const CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detection {
    Homodyne,
    Photocount,
}

impl fmt::Display for Detection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detection::Homodyne => "homodyne",
            Detection::Photocount => "photocount",
        })
    }
}

impl FromStr for Detection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homodyne" => Ok(Detection::Homodyne),
            "photocount" | "counting" => Ok(Detection::Photocount),
            _ => Err(Error::InvalidArgument(format!("unknown detection mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledObservable {
    pub label: String,
    pub matrix: ComplexMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    /// Trajectory `i` uses seed `base_seed + i`.
    pub base_seed: u64,
    pub trajectories: usize,
    pub detection: Detection,
    pub observables: Vec<LabeledObservable>,
    /// Keep every `stride`-th grid point (the last point is always kept).
    pub stride: usize,
    pub options: FilterOptions,
}

impl EnsembleSpec {
    pub fn new(detection: Detection, trajectories: usize, base_seed: u64) -> Self {
        Self {
            base_seed,
            trajectories,
            detection,
            observables: Vec::new(),
            stride: 1,
            options: FilterOptions::default(),
        }
    }

    pub fn observe(mut self, label: impl Into<String>, matrix: ComplexMatrix) -> Self {
        self.observables.push(LabeledObservable { label: label.into(), matrix });
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::InvalidArgument("an ensemble needs at least one trajectory".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        for o in &self.observables {
            model.check_operand(&format!("observable {}", o.label), &o.matrix)?;
            if !o.matrix.is_hermitian(1e-12) {
                return Err(Error::InvalidArgument(format!("observable {} is not Hermitian", o.label)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// `[observable][sample]`
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// The unconditional expectation from the master equation.
    pub master: Vec<Vec<f64>>,
    /// `sup_t |mean − master|` per observable.
    pub sup_distance: Vec<f64>,
    /// Largest entrywise gap between the averaged conditional hierarchy and
    /// the master hierarchy, over every pair and sample.
    pub component_distance: f64,
    /// `[observable][trajectory]` extremes over time, completed trajectories
    /// only.
    pub trajectory_max: Vec<Vec<f64>>,
    pub trajectory_min: Vec<Vec<f64>>,
    /// Detections per completed trajectory (counting only).
    pub counts: Vec<u32>,
    pub completed: usize,
    /// `(seed, reason)` for every aborted trajectory.
    pub failures: Vec<(u64, String)>,
}

impl EnsembleSummary {
    pub fn mean_count(&self) -> Option<f64> {
        (!self.counts.is_empty()).then(|| self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64)
    }

    /// Fraction of trajectories whose observable `k` exceeded `level`.
    pub fn fraction_exceeding(&self, k: usize, level: f64) -> f64 {
        let maxima = &self.trajectory_max[k];
        maxima.iter().filter(|&&m| m > level).count() as f64 / maxima.len().max(1) as f64
    }
}

#[derive(Debug)]
struct Trajectory {
    observables: Vec<Vec<f64>>,
    hierarchy: Vec<Complex64>,
    count: u32,
}

#[derive(Debug)]
struct Accumulator {
    samples: usize,
    len: usize,
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
    hierarchy: Vec<Complex64>,
    maxima: Vec<Vec<f64>>,
    minima: Vec<Vec<f64>>,
    counts: Vec<u32>,
    completed: usize,
    failures: Vec<(u64, String)>,
}

impl Accumulator {
    fn new(observables: usize, samples: usize, len: usize) -> Self {
        Self {
            samples,
            len,
            sum: vec![vec![0.0; samples]; observables],
            sum_sq: vec![vec![0.0; samples]; observables],
            hierarchy: vec![ZERO; samples * len],
            maxima: vec![Vec::new(); observables],
            minima: vec![Vec::new(); observables],
            counts: Vec::new(),
            completed: 0,
            failures: Vec::new(),
        }
    }

    fn add(&mut self, tr: Trajectory, counting: bool) {
        for (k, series) in tr.observables.iter().enumerate() {
            for (s, v) in series.iter().enumerate() {
                self.sum[k][s] += v;
                self.sum_sq[k][s] += v * v;
            }
            self.maxima[k].push(series.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            self.minima[k].push(series.iter().copied().fold(f64::INFINITY, f64::min));
        }
        for (a, b) in self.hierarchy.iter_mut().zip(&tr.hierarchy) {
            *a += b;
        }
        if counting {
            self.counts.push(tr.count);
        }
        self.completed += 1;
    }

    fn mean_hierarchy_distance(&self, master: &[Complex64]) -> f64 {
        let w = 1.0 / self.completed.max(1) as f64;
        self.hierarchy.iter().zip(master).map(|(s, m)| (s * w - m).norm()).fold(0.0, f64::max)
    }

    fn observable_distance(&self, master: &[Vec<f64>]) -> Vec<f64> {
        let w = 1.0 / self.completed.max(1) as f64;
        self.sum
            .iter()
            .zip(master)
            .map(|(s, m)| s.iter().zip(m).map(|(a, b)| (a * w - b).abs()).fold(0.0, f64::max))
            .collect()
    }
}

/// Reference solution sampled on the ensemble's output grid.
struct Reference {
    times: Vec<f64>,
    observables: Vec<Vec<f64>>,
    hierarchy: Vec<Complex64>,
}

fn sampled(m: usize, steps: usize, stride: usize) -> bool {
    m.is_multiple_of(stride) || m == steps
}

fn reference(
    spec: &EnsembleSpec,
    model: &SystemModel,
    photons: &PhotonState,
    t_final: f64,
    dt: f64,
) -> Result<Reference> {
    let steps = step_count(t_final, dt)?;
    let mut r = Reference { times: Vec::new(), observables: vec![Vec::new(); spec.observables.len()], hierarchy: Vec::new() };
    integrate_master_with(model, photons, t_final, dt, |m, t, h| {
        if sampled(m, steps, spec.stride) {
            r.times.push(t);
            record_point(&mut r.observables, &mut r.hierarchy, &spec.observables, h);
        }
    })?;
    Ok(r)
}

fn record_point(obs: &mut [Vec<f64>], hier: &mut Vec<Complex64>, observables: &[LabeledObservable], h: &DensityHierarchy) {
    let d = h.dim();
    let top = &h.as_slice()[..d * d];
    for (series, o) in obs.iter_mut().zip(observables) {
        series.push(kernel::hs_inner(top, o.matrix.as_slice()).re);
    }
    hier.extend_from_slice(h.as_slice());
}

fn run_one(
    spec: &EnsembleSpec,
    model: &SystemModel,
    photons: &PhotonState,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    let steps = step_count(t_final, dt)?;
    let mut tr = Trajectory { observables: vec![Vec::new(); spec.observables.len()], hierarchy: Vec::new(), count: 0 };
    match spec.detection {
        Detection::Homodyne => {
            run_homodyne(
                model,
                photons,
                t_final,
                dt,
                spec.options,
                |m, rate| rate * dt + noise::wiener_increment(seed, m, dt),
                |m, _, h| {
                    if sampled(m, steps, spec.stride) {
                        record_point(&mut tr.observables, &mut tr.hierarchy, &spec.observables, h);
                    }
                },
            )?;
        }
        Detection::Photocount => {
            let (_, count, _, _) = run_photocount(
                model,
                photons,
                t_final,
                dt,
                spec.options,
                |m, rate| noise::uniform(seed, m) < rate * dt,
                |m, _, h, _| {
                    if sampled(m, steps, spec.stride) {
                        record_point(&mut tr.observables, &mut tr.hierarchy, &spec.observables, h);
                    }
                },
            )?;
            tr.count = count;
        }
    }
    Ok(tr)
}

/// Runs the ensemble, calling `checkpoint(done, acc)` after each trajectory.
fn drive(
    spec: &EnsembleSpec,
    model: &SystemModel,
    photons: &PhotonState,
    t_final: f64,
    dt: f64,
    reference: &Reference,
    checkpoint: impl FnMut(usize, &Accumulator),
) -> Result<Accumulator> {
    spec.validate(model)?;
    let len = DensityHierarchy::zeros(photons.n(), model.dim()).as_slice().len();
    let acc = Accumulator::new(spec.observables.len(), reference.times.len(), len);
    fold(spec, acc, |seed| run_one(spec, model, photons, t_final, dt, seed), checkpoint)
}

fn fold(
    spec: &EnsembleSpec,
    mut acc: Accumulator,
    run: impl Fn(u64) -> Result<Trajectory> + Sync,
    mut checkpoint: impl FnMut(usize, &Accumulator),
) -> Result<Accumulator> {
    let counting = spec.detection == Detection::Photocount;
    let total = spec.trajectories;
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let block: Vec<(u64, Result<Trajectory>)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let seed = spec.base_seed.wrapping_add(i as u64);
                (seed, run(seed))
            })
            .collect();
        for (k, (seed, res)) in block.into_iter().enumerate() {
            match res {
                Ok(tr) => acc.add(tr, counting),
                Err(e) => acc.failures.push((seed, e.to_string())),
            }
            checkpoint(start + k + 1, &acc);
        }
        start = end;
    }
    debug_assert_eq!(acc.samples * acc.len, acc.hierarchy.len());
    if acc.failures.len() * 100 > total {
        return Err(Error::EnsembleFailed { failed: acc.failures.len(), total });
    }
    Ok(acc)
}

pub fn run_ensemble(
    spec: &EnsembleSpec,
    model: &SystemModel,
    photons: &PhotonState,
    t_final: f64,
    dt: f64,
) -> Result<EnsembleSummary> {
    let reference = reference(spec, model, photons, t_final, dt)?;
    let acc = drive(spec, model, photons, t_final, dt, &reference, |_, _| {})?;
    let n = acc.completed.max(1) as f64;
    let mean: Vec<Vec<f64>> = acc.sum.iter().map(|s| s.iter().map(|v| v / n).collect()).collect();
    let stderr = acc
        .sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, mu)| {
            sq.iter()
                .zip(mu)
                .map(|(q, m)| {
                    if acc.completed < 2 {
                        0.0
                    } else {
                        let var = (q / n - m * m).max(0.0) * n / (n - 1.0);
                        (var / n).sqrt()
                    }
                })
                .collect()
        })
        .collect();
    Ok(EnsembleSummary {
        times: reference.times.clone(),
        labels: spec.observables.iter().map(|o| o.label.clone()).collect(),
        sup_distance: acc.observable_distance(&reference.observables),
        component_distance: acc.mean_hierarchy_distance(&reference.hierarchy),
        mean,
        stderr,
        master: reference.observables,
        trajectory_max: acc.maxima,
        trajectory_min: acc.minima,
        counts: acc.counts,
        completed: acc.completed,
        failures: acc.failures,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub trajectories: usize,
    pub component_distance: f64,
    pub observable_distance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// `(N₁, N₂, observed ratio, 1/√N ratio)` for consecutive rows.
    pub fn ratios(&self) -> Vec<(usize, usize, f64, f64)> {
        self.rows
            .windows(2)
            .map(|w| {
                let (a, b) = (&w[0], &w[1]);
                let observed = b.component_distance / a.component_distance;
                let expected = (a.trajectories as f64 / b.trajectories as f64).sqrt();
                (a.trajectories, b.trajectories, observed, expected)
            })
            .collect()
    }

    /// Every consecutive ratio lies within a factor of two of `√(N₁/N₂)`.
    pub fn consistent(&self) -> bool {
        self.ratios().iter().all(|&(_, _, r, e)| r >= e / 2.0 && r <= e * 2.0)
    }
}

/// Distance to the master solution after the first `N` trajectories, for
/// each `N` in `ns` (ascending). One ensemble of `max(ns)` trajectories is
/// run and inspected as it accumulates.
pub fn convergence_report(
    spec: &EnsembleSpec,
    model: &SystemModel,
    photons: &PhotonState,
    t_final: f64,
    dt: f64,
    ns: &[usize],
) -> Result<ConvergenceReport> {
    if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) || ns[0] == 0 {
        return Err(Error::InvalidArgument(format!("trajectory counts {ns:?} must be positive and ascending")));
    }
    let mut spec = spec.clone();
    spec.trajectories = *ns.last().unwrap();
    let reference = reference(&spec, model, photons, t_final, dt)?;
    let mut rows = Vec::new();
    drive(&spec, model, photons, t_final, dt, &reference, |done, acc| {
        if ns.contains(&done) {
            rows.push(ConvergenceRow {
                trajectories: done,
                component_distance: acc.mean_hierarchy_distance(&reference.hierarchy),
                observable_distance: acc.observable_distance(&reference.observables),
            });
        }
    })?;
    Ok(ConvergenceReport { rows })
}
