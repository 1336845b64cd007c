//! Unconditional evolution of the hierarchy by fixed-step RK4.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hierarchy::{DensityHierarchy, Terms};
use crate::matrix::ZERO;
use crate::model::SystemModel;
use crate::photon::PhotonState;

/// Number of `dt` steps in `[0, t_final]`; `dt` must divide `t_final`.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!("final time must be non-negative, got {t_final}")));
    }
    let steps = (t_final / dt).round();
    if (steps * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidArgument(format!("time step {dt} does not divide final time {t_final}")));
    }
    Ok(steps as usize)
}

pub struct MasterEngine<'a> {
    terms: Terms<'a>,
    n: usize,
    d: usize,
    k: [Vec<Complex64>; 4],
    stage: DensityHierarchy,
}

impl<'a> MasterEngine<'a> {
    pub fn new(model: &SystemModel, photons: &'a PhotonState) -> Self {
        let stage = DensityHierarchy::zeros(photons.n(), model.dim());
        let len = stage.as_slice().len();
        Self {
            terms: Terms::new(model, photons),
            n: photons.n(),
            d: model.dim(),
            k: std::array::from_fn(|_| vec![ZERO; len]),
            stage,
        }
    }

    /// Time derivative of every stored pair at time `t`.
    pub fn rhs(&mut self, h: &DensityHierarchy, t: f64) -> DensityHierarchy {
        let mut out = DensityHierarchy::zeros(self.n, self.d);
        rhs_into(&mut self.terms, h, t, out.as_mut_slice());
        out
    }

    /// One classical RK4 step from `t` to `t + dt`.
    pub fn step(&mut self, h: &mut DensityHierarchy, t: f64, dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        rhs_into(&mut self.terms, h, t, k1);
        stage(&mut self.stage, h, k1, 0.5 * dt);
        rhs_into(&mut self.terms, &self.stage, t + 0.5 * dt, k2);
        stage(&mut self.stage, h, k2, 0.5 * dt);
        rhs_into(&mut self.terms, &self.stage, t + 0.5 * dt, k3);
        stage(&mut self.stage, h, k3, dt);
        rhs_into(&mut self.terms, &self.stage, t + dt, k4);
        let w = dt / 6.0;
        for (m, y) in h.as_mut_slice().iter_mut().enumerate() {
            *y += w * (k1[m] + 2.0 * (k2[m] + k3[m]) + k4[m]);
        }
    }
}

fn stage(out: &mut DensityHierarchy, h: &DensityHierarchy, k: &[Complex64], dt: f64) {
    for ((o, y), dy) in out.as_mut_slice().iter_mut().zip(h.as_slice()).zip(k) {
        *o = y + dt * dy;
    }
}

pub(crate) fn rhs_into(terms: &mut Terms<'_>, h: &DensityHierarchy, t: f64, out: &mut [Complex64]) {
    let dd = h.dim() * h.dim();
    terms.load(h, t);
    for (p, (i, j)) in h.pair_list().into_iter().enumerate() {
        terms.assemble(i, j);
        terms.drift(&mut out[p * dd..(p + 1) * dd]);
    }
}

/// Hierarchy snapshots at every `stride`-th step (and the last one).
#[derive(Clone, Debug)]
pub struct MasterRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<DensityHierarchy>,
}

pub fn integrate_master(
    model: &SystemModel,
    photons: &PhotonState,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<MasterRun> {
    let stride = stride.max(1);
    let steps = step_count(t_final, dt)?;
    let mut run = MasterRun { times: Vec::new(), snapshots: Vec::new() };
    integrate_master_with(model, photons, t_final, dt, |m, t, h| {
        if m % stride == 0 || m == steps {
            run.times.push(t);
            run.snapshots.push(h.clone());
        }
    })?;
    Ok(run)
}

/// Integrates from the initial hierarchy, calling `observe(step, t, h)` at
/// every grid point including `t = 0`. Returns the final hierarchy.
pub fn integrate_master_with(
    model: &SystemModel,
    photons: &PhotonState,
    t_final: f64,
    dt: f64,
    mut observe: impl FnMut(usize, f64, &DensityHierarchy),
) -> Result<DensityHierarchy> {
    let steps = step_count(t_final, dt)?;
    let mut engine = MasterEngine::new(model, photons);
    let mut h = DensityHierarchy::initial(model, photons);
    observe(0, 0.0, &h);
    for m in 0..steps {
        let t = m as f64 * dt;
        engine.step(&mut h, t, dt);
        if !h.is_finite() {
            return Err(Error::NumericalAbort {
                step: m + 1,
                t: t + dt,
                reason: "non-finite entry in the hierarchy".into(),
            });
        }
        observe(m + 1, (m + 1) as f64 * dt, &h);
    }
    Ok(h)
}

/// `Tr[ρ^{∅;∅} X]` along a run, real part.
pub fn top_expectation_series(run: &MasterRun, x: &crate::matrix::ComplexMatrix) -> Result<Vec<f64>> {
    run.snapshots.iter().map(|h| h.top_expectation(x).map(|z| z.re)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{ComplexMatrix, ONE};
    use crate::photon::{PulseSet, SubsetIndex};
    use crate::superop::{apply_schrodinger, SuperopKind};
    use crate::testing::{chirped_pulses, decaying_qubit, random_hierarchy, random_model};

    #[test]
    fn vacuum_decay_is_exponential() {
        let model = decaying_qubit(vec![ONE, ZERO]);
        let photons = PhotonState::new(PulseSet::new(vec![], 1e-3, 5.0).unwrap());
        let pe = ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let run = integrate_master(&model, &photons, 5.0, 1e-3, 100).unwrap();
        assert_eq!(run.snapshots[0].component_count(), 1);
        for (t, h) in run.times.iter().zip(&run.snapshots) {
            let p = h.top_expectation(&pe).unwrap();
            assert!((p.re - (-t).exp()).abs() < 1e-8, "t={t}");
            assert!(p.im.abs() < 1e-14);
        }
        let h1 = &run.snapshots[10];
        assert!((run.times[10] - 1.0).abs() < 1e-12);
        let e = SubsetIndex::empty(0);
        assert!((h1.expectation(&pe, &e, &e).unwrap().re - (-1f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn component_counts() {
        for (n, want) in [(0, 1), (1, 3), (2, 10), (3, 36)] {
            assert_eq!(DensityHierarchy::zeros(n, 2).component_count(), want);
            assert_eq!(DensityHierarchy::zeros(n, 2).pair_list().len(), want);
        }
    }

    #[test]
    fn initial_overlaps() {
        let model = decaying_qubit(vec![ZERO, ONE]);
        let photons = PhotonState::new(PulseSet::gaussians(&[(1.46, 3.0), (1.46, 3.6)], 1e-3, 0.0).unwrap());
        let h = DensityHierarchy::initial(&model, &photons);
        let eta = model.initial_density();
        let s = |m: &[usize]| SubsetIndex::new(2, m).unwrap();
        let (l, r) = (s(&[2]), s(&[1]));
        let w = photons.state_overlap(&r, &l);
        assert!(w.norm() > 0.5);
        assert!(h.component(&l, &r).unwrap().max_abs_diff(&eta.scale(w)) < 1e-15);
        assert!(h.component(&r, &l).unwrap().max_abs_diff(&eta.scale(w.conj())) < 1e-15);
        assert!(h.top().max_abs_diff(&eta) < 1e-12);
        assert_eq!(h.component(&s(&[]), &s(&[1])).unwrap().max_abs(), 0.0);
        assert!(h.top_expectation(&ComplexMatrix::identity(2)).unwrap().re - 1.0 < 1e-12);
        let sx = ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(h.top_expectation(&sx).unwrap(), ZERO);
        assert!(h.top_expectation(&ComplexMatrix::identity(3)).is_err());
    }

    /// The ten two-photon equations written out by hand, labelled by which
    /// photons are still present (`11` = both, `10` = photon 1 only, ...).
    fn two_photon_rhs(
        model: &SystemModel,
        photons: &PhotonState,
        h: &DensityHierarchy,
        t: f64,
    ) -> Vec<((usize, usize), ComplexMatrix)> {
        // rank positions: 11 ↔ ∅ (0), 10 ↔ {2} (2), 01 ↔ {1} (1), 00 ↔ {1,2} (3)
        let (p11, p10, p01, p00) = (0, 2, 1, 3);
        let x = |a: usize, b: usize| h.component_at(a, b);
        let d = |k: SuperopKind, m: ComplexMatrix| apply_schrodinger(k, model, &m).unwrap();
        use SuperopKind::*;
        let x1 = photons.pulses().value(0, t);
        let x2 = photons.pulses().value(1, t);
        let sn = Complex64::new(photons.normalization(&SubsetIndex::empty(2)).sqrt(), 0.0);
        let nn = sn * sn;
        let sc = |m: ComplexMatrix, z: Complex64| m.scale(z);
        let sum = |ms: Vec<ComplexMatrix>| ms.into_iter().reduce(|a, b| &a + &b).unwrap();
        vec![
            ((p00, p00), d(K00, x(p00, p00))),
            ((p00, p10), sum(vec![d(K00, x(p00, p10)), sc(d(K10, x(p00, p00)), x1.conj())])),
            ((p00, p01), sum(vec![d(K00, x(p00, p01)), sc(d(K10, x(p00, p00)), x2.conj())])),
            (
                (p10, p10),
                sum(vec![
                    d(K00, x(p10, p10)),
                    sc(d(K10, x(p10, p00)), x1.conj()),
                    sc(d(K01, x(p00, p10)), x1),
                    sc(d(K11, x(p00, p00)), x1 * x1.conj()),
                ]),
            ),
            (
                (p10, p01),
                sum(vec![
                    d(K00, x(p10, p01)),
                    sc(d(K10, x(p10, p00)), x2.conj()),
                    sc(d(K01, x(p00, p01)), x1),
                    sc(d(K11, x(p00, p00)), x1 * x2.conj()),
                ]),
            ),
            (
                (p01, p01),
                sum(vec![
                    d(K00, x(p01, p01)),
                    sc(d(K10, x(p01, p00)), x2.conj()),
                    sc(d(K01, x(p00, p01)), x2),
                    sc(d(K11, x(p00, p00)), x2 * x2.conj()),
                ]),
            ),
            (
                (p00, p11),
                sum(vec![
                    d(K00, x(p00, p11)),
                    sc(d(K10, x(p00, p01)), x1.conj() / sn),
                    sc(d(K10, x(p00, p10)), x2.conj() / sn),
                ]),
            ),
            (
                (p10, p11),
                sum(vec![
                    d(K00, x(p10, p11)),
                    sc(d(K10, x(p10, p01)), x1.conj() / sn),
                    sc(d(K10, x(p10, p10)), x2.conj() / sn),
                    sc(d(K01, x(p00, p11)), x1),
                    sc(d(K11, x(p00, p01)), x1 * x1.conj() / sn),
                    sc(d(K11, x(p00, p10)), x1 * x2.conj() / sn),
                ]),
            ),
            (
                (p01, p11),
                sum(vec![
                    d(K00, x(p01, p11)),
                    sc(d(K10, x(p01, p01)), x1.conj() / sn),
                    sc(d(K10, x(p01, p10)), x2.conj() / sn),
                    sc(d(K01, x(p00, p11)), x2),
                    sc(d(K11, x(p00, p10)), x2 * x2.conj() / sn),
                    sc(d(K11, x(p00, p01)), x1.conj() * x2 / sn),
                ]),
            ),
            (
                (p11, p11),
                sum(vec![
                    d(K00, x(p11, p11)),
                    sc(d(K10, x(p11, p01)), x1.conj() / sn),
                    sc(d(K10, x(p11, p10)), x2.conj() / sn),
                    sc(d(K01, x(p01, p11)), x1 / sn),
                    sc(d(K01, x(p10, p11)), x2 / sn),
                    sc(d(K11, x(p01, p01)), x1 * x1.conj() / nn),
                    sc(d(K11, x(p01, p10)), x1 * x2.conj() / nn),
                    sc(d(K11, x(p10, p01)), x1.conj() * x2 / nn),
                    sc(d(K11, x(p10, p10)), x2 * x2.conj() / nn),
                ]),
            ),
        ]
    }

    #[test]
    fn two_photon_rhs_matches_written_out_equations() {
        let model = random_model(3, 11);
        let photons = PhotonState::new(chirped_pulses(&[(1.46, 3.0, 0.7), (2.0, 3.5, -1.3)]));
        let mut engine = MasterEngine::new(&model, &photons);
        for seed in 0..5 {
            let h = random_hierarchy(2, 3, seed);
            for &t in &[2.1, 3.0, 3.77] {
                let got = engine.rhs(&h, t);
                let written = two_photon_rhs(&model, &photons, &h, t);
                assert_eq!(written.len(), 10);
                for ((a, b), want) in written {
                    let g = got.component_at(a, b);
                    assert!(g.max_abs_diff(&want) < 1e-12, "pair ({a},{b}) off by {}", g.max_abs_diff(&want));
                }
            }
        }
    }

    /// Every one of the `4^n` pairs integrated as an independent unknown,
    /// with no use of the adjoint symmetry.
    fn integrate_all_pairs(model: &SystemModel, photons: &PhotonState, steps: usize, dt: f64) -> Vec<Vec<ComplexMatrix>> {
        let p = 1 << photons.n();
        let order = photons.order();
        let eta = model.initial_density();
        let init: Vec<Vec<ComplexMatrix>> = (0..p)
            .map(|i| (0..p).map(|j| eta.scale(photons.state_overlap(&order.subset(j), &order.subset(i)))).collect())
            .collect();
        let rhs = |y: &Vec<Vec<ComplexMatrix>>, t: f64| -> Vec<Vec<ComplexMatrix>> {
            (0..p)
                .map(|i| {
                    (0..p)
                        .map(|j| {
                            let (l, r) = (order.subset(i), order.subset(j));
                            let at = |s: &SubsetIndex| s.rank() - 1;
                            let d = |k, m: &ComplexMatrix| apply_schrodinger(k, model, m).unwrap();
                            let mut out = d(SuperopKind::K00, &y[i][j]);
                            let cl = photons.annihilation_coefficients(&l, t);
                            let cr = photons.annihilation_coefficients(&r, t);
                            for &(mu, c) in &cr {
                                out = &out + &d(SuperopKind::K10, &y[i][at(&r.with(mu))]).scale(c.conj());
                            }
                            for &(nu, c) in &cl {
                                out = &out + &d(SuperopKind::K01, &y[at(&l.with(nu))][j]).scale(c);
                            }
                            for &(nu, c1) in &cl {
                                for &(mu, c2) in &cr {
                                    let m = &y[at(&l.with(nu))][at(&r.with(mu))];
                                    out = &out + &d(SuperopKind::K11, m).scale(c1 * c2.conj());
                                }
                            }
                            out
                        })
                        .collect()
                })
                .collect()
        };
        let axpy = |y: &Vec<Vec<ComplexMatrix>>, k: &Vec<Vec<ComplexMatrix>>, h: f64| -> Vec<Vec<ComplexMatrix>> {
            y.iter()
                .zip(k)
                .map(|(yr, kr)| yr.iter().zip(kr).map(|(a, b)| a + &b.scale(Complex64::new(h, 0.0))).collect())
                .collect()
        };
        let mut y = init;
        for m in 0..steps {
            let t = m as f64 * dt;
            let k1 = rhs(&y, t);
            let k2 = rhs(&axpy(&y, &k1, dt / 2.0), t + dt / 2.0);
            let k3 = rhs(&axpy(&y, &k2, dt / 2.0), t + dt / 2.0);
            let k4 = rhs(&axpy(&y, &k3, dt), t + dt);
            let s = axpy(&axpy(&axpy(&k1, &k2, 2.0), &k3, 2.0), &k4, 1.0);
            y = axpy(&y, &s, dt / 6.0);
        }
        y
    }

    #[test]
    fn canonical_storage_matches_full_pair_integration() {
        let model = random_model(2, 5);
        let photons = PhotonState::new(chirped_pulses(&[(1.46, 2.5, 0.4), (2.92, 3.0, 0.0)]));
        let (steps, dt) = (400, 0.01);
        let full = integrate_all_pairs(&model, &photons, steps, dt);
        let h = integrate_master_with(&model, &photons, steps as f64 * dt, dt, |_, _, _| {}).unwrap();
        let mut worst = 0.0f64;
        for (i, row) in full.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                worst = worst.max(h.component_at(i, j).max_abs_diff(m));
            }
        }
        assert!(worst < 1e-10, "max deviation {worst:e}");
    }

    #[test]
    fn traces_are_conserved() {
        let model = random_model(2, 9);
        let photons = PhotonState::new(chirped_pulses(&[(1.46, 3.0, 0.3), (2.0, 3.4, 0.0), (1.7, 4.0, -0.5)]));
        let h0 = DensityHierarchy::initial(&model, &photons);
        let t0 = h0.traces();
        let mut worst = 0.0f64;
        let mut herm = 0.0f64;
        integrate_master_with(&model, &photons, 8.0, 1e-3, |m, _, h| {
            if m % 250 == 0 {
                for (a, b) in h.traces().iter().zip(&t0) {
                    worst = worst.max((a - b).norm());
                }
                herm = herm.max(h.hermitian_defect());
            }
        })
        .unwrap();
        assert!(worst < 1e-6, "trace drift {worst:e}");
        assert!(herm < 1e-10, "hermitian defect {herm:e}");
    }

    #[test]
    fn rhs_is_traceless() {
        let model = random_model(3, 2);
        let photons = PhotonState::new(chirped_pulses(&[(1.46, 3.0, 0.3), (2.0, 3.4, 0.0)]));
        let mut engine = MasterEngine::new(&model, &photons);
        let h = random_hierarchy(2, 3, 4);
        for tr in engine.rhs(&h, 3.1).traces() {
            assert!(tr.norm() < 1e-12);
        }
    }

    #[test]
    fn step_count_requires_divisibility() {
        assert_eq!(step_count(10.0, 1e-3).unwrap(), 10_000);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(-1.0, 0.1).is_err());
        assert!(step_count(1.0, 0.0).is_err());
    }
}
