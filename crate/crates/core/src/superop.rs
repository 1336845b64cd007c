//! The four Heisenberg-picture generators `𝓛_jk` and their Schrödinger
//! counterparts `𝒟_jk`.
//!
//! ```text
//! 𝓛_00(X) = ½L†[X,L] + ½[L†,X]L − i[X,H]     𝒟_00(ρ) = ½[Lρ,L†] + ½[L,ρL†] − i[H,ρ]
//! 𝓛_01(X) = [L†,X]S                         𝒟_01(ρ) = [Sρ,L†]
//! 𝓛_10(X) = S†[X,L]                         𝒟_10(ρ) = [L,ρS†]
//! 𝓛_11(X) = S†XS − X                        𝒟_11(ρ) = SρS† − ρ
//! ```
//!
//! Under the trace pairing `Tr[ρ† X]` the off-diagonal families swap:
//! `𝒟_10` is the adjoint of `𝓛_01` and `𝒟_01` the adjoint of `𝓛_10`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{kernel, ComplexMatrix, I, ONE};
use crate::model::SystemModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SuperopKind {
    K00,
    K01,
    K10,
    K11,
}

impl SuperopKind {
    pub const ALL: [SuperopKind; 4] = [SuperopKind::K00, SuperopKind::K01, SuperopKind::K10, SuperopKind::K11];

    /// The Schrödinger-picture family paired with this Heisenberg family.
    pub fn dual(self) -> Self {
        match self {
            SuperopKind::K01 => SuperopKind::K10,
            SuperopKind::K10 => SuperopKind::K01,
            k => k,
        }
    }
}

impl fmt::Display for SuperopKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SuperopKind::K00 => "00",
            SuperopKind::K01 => "01",
            SuperopKind::K10 => "10",
            SuperopKind::K11 => "11",
        };
        f.write_str(s)
    }
}

impl FromStr for SuperopKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "00" => Ok(SuperopKind::K00),
            "01" => Ok(SuperopKind::K01),
            "10" => Ok(SuperopKind::K10),
            "11" => Ok(SuperopKind::K11),
            other => Err(Error::InvalidArgument(format!("unknown superoperator `{other}`"))),
        }
    }
}

/// `𝓛_jk(X)`
pub fn apply_heisenberg(kind: SuperopKind, model: &SystemModel, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    model.check_operand("X", x)?;
    let l = model.coupling();
    let s = model.scattering();
    let ld = l.adjoint();
    let sd = s.adjoint();
    let half = Complex64::new(0.5, 0.0);
    Ok(match kind {
        SuperopKind::K00 => {
            let a = (&ld * &x.commutator(l)).scale(half);
            let b = (&ld.commutator(x) * l).scale(half);
            let c = x.commutator(model.hamiltonian()).scale(-I);
            &(&a + &b) + &c
        }
        SuperopKind::K01 => &ld.commutator(x) * s,
        SuperopKind::K10 => &sd * &x.commutator(l),
        SuperopKind::K11 => &(&(&sd * x) * s) - x,
    })
}

/// `𝒟_jk(ρ)`
pub fn apply_schrodinger(kind: SuperopKind, model: &SystemModel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    model.check_operand("rho", rho)?;
    let l = model.coupling();
    let s = model.scattering();
    let ld = l.adjoint();
    let sd = s.adjoint();
    let half = Complex64::new(0.5, 0.0);
    Ok(match kind {
        SuperopKind::K00 => {
            let a = (l * rho).commutator(&ld).scale(half);
            let b = l.commutator(&(rho * &ld)).scale(half);
            let c = model.hamiltonian().commutator(rho).scale(-I);
            &(&a + &b) + &c
        }
        SuperopKind::K01 => (s * rho).commutator(&ld),
        SuperopKind::K10 => l.commutator(&(rho * &sd)),
        SuperopKind::K11 => &(&(s * rho) * &sd) - rho,
    })
}

/// Result of a randomized trace-pairing check between the two pictures.
#[derive(Clone, Debug)]
pub struct DualityReport {
    pub trials: usize,
    /// Largest `|Tr[𝒟(ρ)† X] − Tr[ρ† 𝓛(X)]|` per Heisenberg family.
    pub per_kind: [(SuperopKind, f64); 4],
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl DualityReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

/// Checks `Tr[𝒟_dual(ρ)† X] = Tr[ρ† 𝓛(X)]` on random `(ρ, X)` pairs.
pub fn verify_duality(model: &SystemModel, trials: usize) -> DualityReport {
    verify_duality_with(model, trials, 0x5eed, |k, rho| {
        apply_schrodinger(k, model, rho).expect("square operand of system dimension")
    })
}

/// Same as [`verify_duality`] against a caller-supplied Schrödinger map.
pub fn verify_duality_with<F>(model: &SystemModel, trials: usize, seed: u64, schrodinger: F) -> DualityReport
where
    F: Fn(SuperopKind, &ComplexMatrix) -> ComplexMatrix,
{
    let trials = trials.max(1);
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_kind = SuperopKind::ALL.map(|k| (k, 0.0_f64));
    for _ in 0..trials {
        let rho = ComplexMatrix::random(d, d, &mut rng);
        let x = ComplexMatrix::random(d, d, &mut rng);
        for entry in per_kind.iter_mut() {
            let kind = entry.0;
            let lhs = schrodinger(kind.dual(), &rho).hs_inner(&x);
            let heis = apply_heisenberg(kind, model, &x).expect("square operand of system dimension");
            let rhs = rho.hs_inner(&heis);
            entry.1 = entry.1.max((lhs - rhs).norm());
        }
    }
    let max_deviation = per_kind.iter().map(|e| e.1).fold(0.0, f64::max);
    DualityReport { trials, per_kind, max_deviation, tolerance: 1e-12 }
}

/// Precomputed operator products for the allocation-free hot loops.
#[derive(Clone, Debug)]
pub(crate) struct OperatorKernel {
    pub d: usize,
    l: Vec<Complex64>,
    ld: Vec<Complex64>,
    s: Vec<Complex64>,
    sd: Vec<Complex64>,
    // K = ½L†L + iH, so that 𝒟_00(ρ) = LρL† − Kρ − ρK†.
    k: Vec<Complex64>,
    kd: Vec<Complex64>,
}

impl OperatorKernel {
    pub fn new(model: &SystemModel) -> Self {
        let l = model.coupling();
        let s = model.scattering();
        let ld = l.adjoint();
        let k = &(&ld * l).scale(Complex64::new(0.5, 0.0)) + &model.hamiltonian().scale(I);
        Self {
            d: model.dim(),
            l: l.as_slice().to_vec(),
            ld: ld.as_slice().to_vec(),
            s: s.as_slice().to_vec(),
            sd: s.adjoint().into_vec(),
            kd: k.adjoint().into_vec(),
            k: k.into_vec(),
        }
    }

    /// `out = 𝒟_00(ρ)`
    pub fn lindblad(&self, rho: &[Complex64], out: &mut [Complex64], tmp: &mut [Complex64]) {
        let d = self.d;
        kernel::mul(d, rho, &self.ld, tmp);
        kernel::mul(d, &self.l, tmp, out);
        kernel::mul_acc(d, -ONE, &self.k, rho, out);
        kernel::mul_acc(d, -ONE, rho, &self.kd, out);
    }

    /// `out += 𝒟_10(a) = L(aS†) − (aS†)L`
    pub fn add_creation(&self, a: &[Complex64], out: &mut [Complex64], tmp: &mut [Complex64]) {
        let d = self.d;
        kernel::mul(d, a, &self.sd, tmp);
        kernel::mul_acc(d, ONE, &self.l, tmp, out);
        kernel::mul_acc(d, -ONE, tmp, &self.l, out);
    }

    /// `out += 𝒟_01(b) = (Sb)L† − L†(Sb)`
    pub fn add_annihilation(&self, b: &[Complex64], out: &mut [Complex64], tmp: &mut [Complex64]) {
        let d = self.d;
        kernel::mul(d, &self.s, b, tmp);
        kernel::mul_acc(d, ONE, tmp, &self.ld, out);
        kernel::mul_acc(d, -ONE, &self.ld, tmp, out);
    }

    /// `out += 𝒟_11(c) = ScS† − c`
    pub fn add_scattering(&self, c: &[Complex64], out: &mut [Complex64], tmp: &mut [Complex64]) {
        let d = self.d;
        kernel::mul(d, c, &self.sd, tmp);
        kernel::mul_acc(d, ONE, &self.s, tmp, out);
        kernel::axpy(-ONE, c, out);
    }

    /// `out = Lρ + ρL† + aS† + Sb`
    pub fn homodyne_gain(&self, rho: &[Complex64], a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
        let d = self.d;
        kernel::mul(d, &self.l, rho, out);
        kernel::mul_acc(d, ONE, rho, &self.ld, out);
        kernel::mul_acc(d, ONE, a, &self.sd, out);
        kernel::mul_acc(d, ONE, &self.s, b, out);
    }

    /// `out = LρL† + LaS† + SbL† + ScS†`
    pub fn jump(
        &self,
        rho: &[Complex64],
        a: &[Complex64],
        b: &[Complex64],
        c: &[Complex64],
        out: &mut [Complex64],
        tmp: &mut [Complex64],
    ) {
        let d = self.d;
        // L(ρL† + aS†) + S(bL† + cS†)
        kernel::mul(d, rho, &self.ld, tmp);
        kernel::mul_acc(d, ONE, a, &self.sd, tmp);
        kernel::mul(d, &self.l, tmp, out);
        kernel::mul(d, b, &self.ld, tmp);
        kernel::mul_acc(d, ONE, c, &self.sd, tmp);
        kernel::mul_acc(d, ONE, &self.s, tmp, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ZERO;
    use proptest::prelude::*;

    type M2 = [[Complex64; 2]; 2];

    // Plain 2x2 arithmetic, kept independent of ComplexMatrix.
    fn mm(a: M2, b: M2) -> M2 {
        let mut c = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        c
    }
    fn sub(a: M2, b: M2) -> M2 {
        [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
    }
    fn add(a: M2, b: M2) -> M2 {
        [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
    }
    fn half(a: M2) -> M2 {
        a.map(|r| r.map(|z| z * 0.5))
    }
    fn to_m2(m: &ComplexMatrix) -> M2 {
        [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
    }
    fn close(a: M2, b: M2, tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).norm() <= tol))
    }

    fn decaying_qubit() -> SystemModel {
        SystemModel::new(
            ComplexMatrix::identity(2),
            ComplexMatrix::from_real(&[&[0.0, 0.0], &[1.0, 0.0]]),
            ComplexMatrix::zeros(2, 2),
            vec![ONE, ZERO],
        )
        .unwrap()
    }

    fn random_model(d: usize, seed: u64) -> SystemModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = ComplexMatrix::random_unitary(d, &mut rng);
        let l = ComplexMatrix::random(d, d, &mut rng);
        let h = ComplexMatrix::random_hermitian(d, &mut rng);
        let mut eta = vec![ZERO; d];
        eta[0] = ONE;
        SystemModel::new(s, l, h, eta).unwrap()
    }

    #[test]
    fn generators_annihilate_identity() {
        for model in [decaying_qubit(), random_model(3, 1)] {
            let id = ComplexMatrix::identity(model.dim());
            for k in SuperopKind::ALL {
                let out = apply_heisenberg(k, &model, &id).unwrap();
                assert!(out.max_abs() < 1e-12, "L_{k}(I) = {out:?}");
            }
        }
    }

    #[test]
    fn scattering_generator_vanishes_for_trivial_scattering() {
        let model = decaying_qubit();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = ComplexMatrix::random(2, 2, &mut rng);
        assert!(apply_heisenberg(SuperopKind::K11, &model, &x).unwrap().max_abs() < 1e-15);
        assert!(apply_schrodinger(SuperopKind::K11, &model, &x).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn excited_population_decays_at_unit_rate() {
        let model = decaying_qubit();
        let pe = ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let got = to_m2(&apply_heisenberg(SuperopKind::K00, &model, &pe).unwrap());

        // ½L*[X,L] + ½[L*,X]L with L = σ₋
        let l = [[ZERO, ZERO], [ONE, ZERO]];
        let ld = [[ZERO, ONE], [ZERO, ZERO]];
        let x = to_m2(&pe);
        let oracle = add(half(mm(ld, sub(mm(x, l), mm(l, x)))), half(mm(sub(mm(ld, x), mm(x, ld)), l)));
        assert!(close(got, oracle, 1e-15));
        assert!(close(got, [[-ONE, ZERO], [ZERO, ZERO]], 1e-15));
    }

    #[test]
    fn annihilation_dissipator_on_excited_state() {
        let model = decaying_qubit();
        let rho = ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let got = to_m2(&apply_schrodinger(SuperopKind::K01, &model, &rho).unwrap());
        // [Sρ, L*] with S = I
        let ld = [[ZERO, ONE], [ZERO, ZERO]];
        let r = to_m2(&rho);
        let oracle = sub(mm(r, ld), mm(ld, r));
        assert!(close(got, oracle, 1e-15));
        assert!(close(got, [[ZERO, ONE], [ZERO, ZERO]], 1e-15));
    }

    #[test]
    fn dimension_mismatch_names_operand() {
        let model = decaying_qubit();
        let err = apply_heisenberg(SuperopKind::K00, &model, &ComplexMatrix::identity(3)).unwrap_err();
        assert!(err.to_string().contains("`X`"), "{err}");
        let err = apply_schrodinger(SuperopKind::K10, &model, &ComplexMatrix::zeros(2, 3)).unwrap_err();
        assert!(err.to_string().contains("`rho`"), "{err}");
    }

    #[test]
    fn duality_holds_for_qubit_and_random_qutrit() {
        let report = verify_duality(&decaying_qubit(), 100);
        assert!(report.passed(), "{report:?}");
        let report = verify_duality(&random_model(3, 11), 100);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn duality_flags_sign_flipped_dissipator() {
        let model = random_model(3, 5);
        let report = verify_duality_with(&model, 100, 1, |k, rho| {
            let out = apply_schrodinger(k, &model, rho).unwrap();
            if k == SuperopKind::K01 {
                -&out
            } else {
                out
            }
        });
        assert!(!report.passed());
        assert!(report.max_deviation > 0.1, "{report:?}");
        let (_, dev) = report.per_kind.iter().find(|e| e.0 == SuperopKind::K10).unwrap();
        assert!(*dev > 0.1);
    }

    #[test]
    fn kernel_agrees_with_dense_maps() {
        let model = random_model(3, 21);
        let k = OperatorKernel::new(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = ComplexMatrix::random(3, 3, &mut rng);
        let mut out = vec![ZERO; 9];
        let mut tmp = vec![ZERO; 9];
        k.lindblad(rho.as_slice(), &mut out, &mut tmp);
        let want = apply_schrodinger(SuperopKind::K00, &model, &rho).unwrap();
        assert!(ComplexMatrix::from_vec(3, 3, out.clone()).unwrap().max_abs_diff(&want) < 1e-13);

        for (kind, f) in [
            (SuperopKind::K10, OperatorKernel::add_creation as fn(&OperatorKernel, &[Complex64], &mut [Complex64], &mut [Complex64])),
            (SuperopKind::K01, OperatorKernel::add_annihilation),
            (SuperopKind::K11, OperatorKernel::add_scattering),
        ] {
            out.fill(ZERO);
            f(&k, rho.as_slice(), &mut out, &mut tmp);
            let want = apply_schrodinger(kind, &model, &rho).unwrap();
            assert!(ComplexMatrix::from_vec(3, 3, out.clone()).unwrap().max_abs_diff(&want) < 1e-13, "{kind}");
        }
    }

    fn arb_matrix(d: usize) -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), d * d).prop_map(move |v| {
            ComplexMatrix::from_vec(d, d, v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn hermitian_structure_is_preserved(seed in 0u64..1000, x in arb_matrix(3)) {
            let model = random_model(3, seed);
            let herm = (&x + &x.adjoint()).scale(Complex64::new(0.5, 0.0));
            let l00 = apply_heisenberg(SuperopKind::K00, &model, &herm).unwrap();
            let l11 = apply_heisenberg(SuperopKind::K11, &model, &herm).unwrap();
            prop_assert!(l00.is_hermitian(1e-12));
            prop_assert!(l11.is_hermitian(1e-12));
            let l10 = apply_heisenberg(SuperopKind::K10, &model, &x).unwrap();
            let l01 = apply_heisenberg(SuperopKind::K01, &model, &x.adjoint()).unwrap().adjoint();
            prop_assert!(l10.max_abs_diff(&l01) < 1e-12);
        }

        #[test]
        fn schrodinger_maps_are_traceless(seed in 0u64..1000, rho in arb_matrix(3)) {
            let model = random_model(3, seed);
            for k in SuperopKind::ALL {
                let out = apply_schrodinger(k, &model, &rho).unwrap();
                prop_assert!(out.trace().norm() < 1e-12);
            }
        }
    }
}
