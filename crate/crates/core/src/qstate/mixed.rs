use alloc::vec;
use alloc::vec::Vec;

use super::pure::check_gate;
use super::{check_qubit_count, z_sign, PSD_TOL, STATE_TOL};
use crate::gates::GateMatrix;
use crate::kernel::{self, max_abs, Embedding};
use crate::{Error, Result, C64};

/// Density matrix over `n_qubits` qubits, row-major `2^n × 2^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    n_qubits: usize,
    matrix: Vec<C64>,
}

impl MixedState {
    /// Validates Hermiticity and unit trace. Positive semidefiniteness is
    /// additionally checked in debug builds.
    pub fn from_matrix(n_qubits: usize, matrix: Vec<C64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if matrix.len() != dim * dim {
            return Err(Error::Length {
                expected: dim * dim,
                found: matrix.len(),
            });
        }
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("density matrix"));
        }
        let state = Self { n_qubits, matrix };
        let herm = state.hermiticity_deviation();
        if herm > STATE_TOL {
            return Err(Error::InvalidState(alloc::format!(
                "not Hermitian (max |M - M†| = {herm:e})"
            )));
        }
        let tr = state.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(alloc::format!(
                "trace {tr} differs from 1"
            )));
        }
        if !state.is_psd(PSD_TOL) {
            return Err(Error::InvalidState("not positive semidefinite".into()));
        }
        Ok(state)
    }

    pub(crate) fn from_raw(n_qubits: usize, matrix: Vec<C64>) -> Self {
        debug_assert_eq!(matrix.len(), 1 << (2 * n_qubits));
        Self { n_qubits, matrix }
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut m = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            m[i * dim + i] = C64::new(1.0 / dim as f64, 0.0);
        }
        Ok(Self::from_raw(n_qubits, m))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn matrix(&self) -> &[C64] {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[row * self.dim() + col]
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|i| self.matrix[i * d + i]).sum()
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        // ρ Hermitian: Tr(ρ²) = Σ |ρ_ij|²
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        max_abs((0..d * d).map(|k| self.matrix[k] - self.matrix[(k % d) * d + k / d].conj()))
    }

    pub fn max_abs_diff(&self, other: &MixedState) -> f64 {
        if self.n_qubits != other.n_qubits {
            return f64::INFINITY;
        }
        max_abs(self.matrix.iter().zip(&other.matrix).map(|(a, b)| a - b))
    }

    /// True when the smallest eigenvalue exceeds `-tol`, decided by a
    /// Cholesky factorisation of `ρ + tol·I`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let d = self.dim();
        let mut l = vec![C64::new(0.0, 0.0); d * d];
        for j in 0..d {
            let mut diag = self.matrix[j * d + j].re + tol;
            for k in 0..j {
                diag -= l[j * d + k].norm_sqr();
            }
            if !(diag > 0.0) {
                return false;
            }
            let ljj = libm::sqrt(diag);
            l[j * d + j] = C64::new(ljj, 0.0);
            for i in j + 1..d {
                let mut s = self.matrix[i * d + j];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k].conj();
                }
                l[i * d + j] = s / ljj;
            }
        }
        true
    }

    /// `U ρ U†` with `U` embedded on `targets`.
    pub fn apply(&self, u: &GateMatrix, targets: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_mut(u, targets)?;
        Ok(out)
    }

    pub(crate) fn apply_mut(&mut self, u: &GateMatrix, targets: &[usize]) -> Result<()> {
        check_gate(self.n_qubits, u, targets)?;
        let emb = Embedding::new(self.n_qubits, targets);
        let d = self.dim();
        kernel::left_apply(&mut self.matrix, d, u.entries(), &emb);
        kernel::right_apply(
            &mut self.matrix,
            d,
            &kernel::dagger(u.entries(), u.dim()),
            &emb,
        );
        Ok(())
    }

    /// `ρ ⊗ σ`; `sigma`'s qubits are appended after this state's qubits.
    pub fn tensor(&self, sigma: &MixedState) -> Result<Self> {
        let n = self.n_qubits + sigma.n_qubits;
        check_qubit_count(n)?;
        Ok(Self::from_raw(
            n,
            kernel::kron(&self.matrix, self.dim(), &sigma.matrix, sigma.dim()),
        ))
    }

    /// Traces out `traced`; the remaining qubits keep their relative order.
    ///
    /// Element rule: `ρ_R[j, l] = Σ_n ρ[(j, n), (l, n)]`.
    pub fn partial_trace(&self, traced: &[usize]) -> Result<Self> {
        if traced.is_empty() {
            return Err(Error::Subset("traced set is empty"));
        }
        kernel::check_targets(self.n_qubits, traced)?;
        if traced.len() == self.n_qubits {
            return Err(Error::Subset("cannot trace out every qubit"));
        }
        let keep = kernel::complement(self.n_qubits, traced);
        self.reduce(&keep, traced)
    }

    /// Reduced state on `keep`, tracing out the complement.
    pub fn reduce_to(&self, keep: &[usize]) -> Result<Self> {
        check_keep(self.n_qubits, keep)?;
        let traced = kernel::complement(self.n_qubits, keep);
        self.reduce(keep, &traced)
    }

    fn reduce(&self, keep: &[usize], traced: &[usize]) -> Result<Self> {
        let d = self.dim();
        let kept = Embedding::new(self.n_qubits, keep).offsets;
        let tr = Embedding::new(self.n_qubits, traced).offsets;
        let dk = kept.len();
        let mut m = vec![C64::new(0.0, 0.0); dk * dk];
        for j in 0..dk {
            for l in 0..dk {
                m[j * dk + l] = tr
                    .iter()
                    .map(|&t| self.matrix[(kept[j] + t) * d + kept[l] + t])
                    .sum();
            }
        }
        Ok(Self::from_raw(keep.len(), m))
    }

    /// Qubit relabelling: new qubit `i` is old qubit `order[i]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let map = kernel::permutation_map(self.n_qubits, order)?;
        let d = self.dim();
        let mut m = Vec::with_capacity(d * d);
        for &r in &map {
            m.extend(map.iter().map(|&c| self.matrix[r * d + c]));
        }
        Ok(Self::from_raw(self.n_qubits, m))
    }

    /// `Tr(Z_q ρ)`; the imaginary part vanishes for Hermitian `ρ`.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        let d = self.dim();
        let v: C64 = (0..d)
            .map(|i| self.matrix[i * d + i] * z_sign(self.n_qubits, qubit, i))
            .sum();
        debug_assert!(v.im.abs() < 1e-10, "imaginary readout {}", v.im);
        Ok(v.re)
    }
}

pub(crate) fn check_keep(n_qubits: usize, keep: &[usize]) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::Subset("kept set is empty"));
    }
    kernel::check_targets(n_qubits, keep)?;
    if keep.len() == n_qubits {
        return Err(Error::Subset("kept set must be a proper subset"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{named_gate, rotation, su4, Pauli, Su4Params};
    use crate::qstate::PureState;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    /// Random density matrix `A A† / Tr(A A†)` from a seed-free proptest vector.
    fn density_from(n: usize, raw: &[f64]) -> MixedState {
        let d = 1 << n;
        let a: Vec<C64> = (0..d * d)
            .map(|k| C64::new(raw[2 * k], raw[2 * k + 1]))
            .collect();
        let aa = kernel::matmul(&a, &kernel::dagger(&a, d), d);
        let tr: f64 = (0..d).map(|i| aa[i * d + i].re).sum();
        MixedState::from_matrix(n, aa.into_iter().map(|z| z / tr).collect()).unwrap()
    }

    fn pure_from(n: usize, raw: &[f64]) -> PureState {
        let d = 1 << n;
        let v: Vec<C64> = (0..d)
            .map(|k| C64::new(raw[2 * k], raw[2 * k + 1]))
            .collect();
        let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
        PureState::from_amplitudes(v.into_iter().map(|z| z / norm).collect()).unwrap()
    }

    fn su4_from(raw: &[f64]) -> GateMatrix {
        su4(&Su4Params::from_slice(&raw[..15]).unwrap()).unwrap()
    }

    /// Direct Σ_n ρ_{jnln} over explicit bit tuples (test oracle).
    fn brute_partial_trace(rho: &MixedState, traced: &[usize]) -> Vec<C64> {
        let n = rho.n_qubits();
        let keep: Vec<usize> = (0..n).filter(|q| !traced.contains(q)).collect();
        let compose = |j: usize, t: usize| -> usize {
            let mut idx = 0;
            for (pos, &q) in keep.iter().enumerate() {
                idx |= ((j >> (keep.len() - 1 - pos)) & 1) << (n - 1 - q);
            }
            for (pos, &q) in traced.iter().enumerate() {
                idx |= ((t >> (traced.len() - 1 - pos)) & 1) << (n - 1 - q);
            }
            idx
        };
        let dk = 1 << keep.len();
        let dt = 1 << traced.len();
        let mut out = vec![c(0.0); dk * dk];
        for j in 0..dk {
            for l in 0..dk {
                for t in 0..dt {
                    out[j * dk + l] += rho.get(compose(j, t), compose(l, t));
                }
            }
        }
        out
    }

    #[test]
    fn unitary_examples() {
        let zero = PureState::zero(1).unwrap().to_density();
        let flipped = zero.apply(&named_gate("X").unwrap(), &[0]).unwrap();
        assert_eq!(flipped.matrix(), &[c(0.0), c(0.0), c(0.0), c(1.0)]);
        let rho = MixedState::maximally_mixed(2).unwrap();
        assert_eq!(rho.apply(&GateMatrix::identity(2), &[1]).unwrap(), rho);
    }

    #[test]
    fn to_density_examples() {
        assert_eq!(
            PureState::zero(1).unwrap().to_density().matrix(),
            &[c(1.0), c(0.0), c(0.0), c(0.0)]
        );
        let plus = PureState::cluster(1).unwrap().to_density();
        assert!(plus
            .matrix()
            .iter()
            .all(|z| (z - c(0.5)).norm_sqr() < 1e-30));
    }

    #[test]
    fn tensor_examples() {
        let half = MixedState::maximally_mixed(1).unwrap();
        let zero = PureState::zero(1).unwrap().to_density();
        let t = half.tensor(&zero).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = match (i, j) {
                    (0, 0) | (2, 2) => 0.5,
                    _ => 0.0,
                };
                assert_eq!(t.get(i, j), c(e));
            }
        }
        let big = MixedState::maximally_mixed(6).unwrap();
        let huge = MixedState::maximally_mixed(7).unwrap();
        assert_eq!(big.tensor(&huge), Err(Error::QubitCount(13)));
    }

    #[test]
    fn partial_trace_examples() {
        // Bell state → I/2
        let s = FRAC_1_SQRT_2;
        let bell = PureState::from_amplitudes(vec![c(s), c(0.0), c(0.0), c(s)])
            .unwrap()
            .to_density();
        let red = bell.partial_trace(&[1]).unwrap();
        assert!(red.max_abs_diff(&MixedState::maximally_mixed(1).unwrap()) < 1e-15);

        assert_eq!(
            bell.partial_trace(&[]),
            Err(Error::Subset("traced set is empty"))
        );
        assert!(bell.partial_trace(&[0, 1]).is_err());
        assert!(bell.partial_trace(&[2]).is_err());
        assert!(bell.reduce_to(&[0, 1]).is_err());
    }
    use core::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn partial_trace_matches_brute_force_on_three_qubits() {
        let raw: Vec<f64> = (0..128).map(|k| libm::sin(1.3 * k as f64 + 0.2)).collect();
        let rho = density_from(3, &raw);
        let out = rho.partial_trace(&[1]).unwrap();
        let oracle = brute_partial_trace(&rho, &[1]);
        assert!(max_abs(out.matrix().iter().zip(&oracle).map(|(a, b)| a - b)) < 1e-12);
    }

    #[test]
    fn expect_z_of_rx() {
        for t in [0.3, 1.0, 2.0] {
            let s = PureState::zero(1)
                .unwrap()
                .apply(&rotation(Pauli::X, t).unwrap(), &[0])
                .unwrap();
            let z = s.to_density().expect_z(0).unwrap();
            assert!((z - libm::cos(t)).abs() < 1e-15);
        }
        assert_eq!(
            PureState::basis(1, 1)
                .unwrap()
                .to_density()
                .expect_z(0)
                .unwrap(),
            -1.0
        );
        assert!(MixedState::maximally_mixed(1).unwrap().expect_z(1).is_err());
    }

    #[test]
    fn from_matrix_validates() {
        assert!(MixedState::from_matrix(1, vec![c(1.0), c(0.0), c(0.0), c(1.0)]).is_err());
        assert!(MixedState::from_matrix(1, vec![c(1.0), c(0.2), c(0.0), c(0.0)]).is_err());
        // Hermitian, unit trace, eigenvalues 1.5 and -0.5
        assert!(MixedState::from_matrix(1, vec![c(0.5), c(1.0), c(1.0), c(0.5)]).is_err());
        assert!(MixedState::from_matrix(1, vec![c(0.5), c(0.5), c(0.5), c(0.5)]).is_ok());
    }

    fn raw(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0..1.0f64, len)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn unitary_preserves_norm_trace_and_hermiticity(s in raw(16), r in raw(128), g in raw(15)) {
            let u = su4_from(&g);
            let psi = pure_from(3, &s);
            let out = psi.apply(&u, &[2, 0]).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);

            let rho = density_from(3, &r);
            let before = rho.trace();
            let after = rho.apply(&u, &[0, 2]).unwrap();
            prop_assert!((after.trace() - before).norm_sqr().sqrt() < 1e-12);
            prop_assert!(after.hermiticity_deviation() < 1e-12);
            prop_assert!(after.partial_trace(&[1]).unwrap().hermiticity_deviation() < 1e-12);
        }

        #[test]
        fn pure_and_mixed_paths_agree(s in raw(8), g in raw(15)) {
            let u = su4_from(&g);
            let psi = pure_from(2, &s);
            let via_pure = psi.apply(&u, &[0, 1]).unwrap().to_density();
            let via_mixed = psi.to_density().apply(&u, &[0, 1]).unwrap();
            prop_assert!(via_pure.max_abs_diff(&via_mixed) < 1e-12);
            for q in 0..2 {
                prop_assert!((via_pure.expect_z(q).unwrap() - via_mixed.expect_z(q).unwrap()).abs() < 1e-10);
            }
        }

        #[test]
        fn tensor_then_trace_round_trips(a in raw(32), b in raw(8)) {
            let rho = density_from(2, &a);
            let sigma = density_from(1, &b);
            let joint = rho.tensor(&sigma).unwrap();
            prop_assert!((joint.trace() - c(1.0)).norm_sqr() < 1e-24);
            prop_assert!(joint.partial_trace(&[2]).unwrap().max_abs_diff(&rho) < 1e-12);
            prop_assert!(joint.reduce_to(&[2]).unwrap().max_abs_diff(&sigma) < 1e-12);
        }

        #[test]
        fn purity_of_pure_states(s in raw(16)) {
            let rho = pure_from(3, &s).to_density();
            prop_assert!((rho.purity() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn pure_reduction_matches_density_reduction(s in raw(16)) {
            let psi = pure_from(3, &s);
            let a = psi.reduce_to(&[0, 2]).unwrap();
            let b = psi.to_density().partial_trace(&[1]).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-14);
        }

        #[test]
        fn permutation_moves_readouts(s in raw(16)) {
            let rho = pure_from(3, &s).to_density();
            let p = rho.permute(&[2, 0, 1]).unwrap();
            for (new, old) in [(0usize, 2usize), (1, 0), (2, 1)] {
                prop_assert!((p.expect_z(new).unwrap() - rho.expect_z(old).unwrap()).abs() < 1e-14);
            }
        }
    }
}
