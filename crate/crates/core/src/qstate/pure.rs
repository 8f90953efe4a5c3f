use alloc::vec;
use alloc::vec::Vec;

use super::{check_qubit_count, z_sign, MixedState, STATE_TOL};
use crate::gates::GateMatrix;
use crate::kernel::{self, Embedding};
use crate::{Error, Result, C64};

/// Normalized amplitude vector over `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl PureState {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Dimension {
                expected: dim,
                found: index,
            });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps an amplitude vector, checking its length and unit norm.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Dimension {
                expected: dim.next_power_of_two().max(2),
                found: dim,
            });
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("amplitudes"));
        }
        let state = Self {
            n_qubits,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(alloc::format!(
                "squared norm {norm} differs from 1"
            )));
        }
        Ok(state)
    }

    pub(crate) fn from_raw(n_qubits: usize, amplitudes: Vec<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_qubits);
        Self {
            n_qubits,
            amplitudes,
        }
    }

    /// Open-chain cluster state: `H` on every qubit of `|0…0⟩` followed by
    /// `CZ` on each neighbour pair `(q, q+1)`.
    ///
    /// Built in closed form: every amplitude is `2^(-n/2)` with sign
    /// `(-1)^(Σ_q b_q b_{q+1})`.
    pub fn cluster(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mag = 1.0 / libm::sqrt(dim as f64);
        let amplitudes = (0..dim)
            .map(|b| {
                // adjacent set bits <=> CZ phase
                let parity = (b & (b >> 1)).count_ones() & 1;
                C64::new(if parity == 0 { mag } else { -mag }, 0.0)
            })
            .collect();
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `(u on targets ⊗ I elsewhere) |ψ⟩`.
    pub fn apply(&self, u: &GateMatrix, targets: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_mut(u, targets)?;
        Ok(out)
    }

    pub(crate) fn apply_mut(&mut self, u: &GateMatrix, targets: &[usize]) -> Result<()> {
        check_gate(self.n_qubits, u, targets)?;
        let emb = Embedding::new(self.n_qubits, targets);
        kernel::apply_vec(&mut self.amplitudes, u.entries(), &emb);
        Ok(())
    }

    /// `|ψ⟩ ⊗ |φ⟩`; `other`'s qubits follow this state's qubits.
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        let n = self.n_qubits + other.n_qubits;
        check_qubit_count(n)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(Self::from_raw(n, amplitudes))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn to_density(&self) -> MixedState {
        let dim = self.dim();
        let mut m = Vec::with_capacity(dim * dim);
        for a in &self.amplitudes {
            m.extend(self.amplitudes.iter().map(|b| a * b.conj()));
        }
        MixedState::from_raw(self.n_qubits, m)
    }

    /// Reduced state on `keep` (ascending order is preserved as given).
    pub fn reduce_to(&self, keep: &[usize]) -> Result<MixedState> {
        super::mixed::check_keep(self.n_qubits, keep)?;
        let traced = kernel::complement(self.n_qubits, keep);
        let kept = Embedding::new(self.n_qubits, keep);
        let dk = kept.local_dim();
        let tr = Embedding::new(self.n_qubits, &traced).offsets;
        let mut m = vec![C64::new(0.0, 0.0); dk * dk];
        for j in 0..dk {
            for l in 0..dk {
                m[j * dk + l] = tr
                    .iter()
                    .map(|&t| {
                        self.amplitudes[kept.offsets[j] + t]
                            * self.amplitudes[kept.offsets[l] + t].conj()
                    })
                    .sum();
            }
        }
        Ok(MixedState::from_raw(keep.len(), m))
    }

    /// Qubit relabelling: new qubit `i` is old qubit `order[i]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let map = kernel::permutation_map(self.n_qubits, order)?;
        Ok(Self::from_raw(
            self.n_qubits,
            map.iter().map(|&old| self.amplitudes[old]).collect(),
        ))
    }

    /// `⟨ψ|Z_q|ψ⟩`.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, z)| z_sign(self.n_qubits, qubit, i) * z.norm_sqr())
            .sum())
    }
}

pub(crate) fn check_gate(n_qubits: usize, u: &GateMatrix, targets: &[usize]) -> Result<()> {
    if targets.is_empty() || u.dim() != 1 << targets.len() {
        return Err(Error::Dimension {
            expected: 1 << targets.len(),
            found: u.dim(),
        });
    }
    kernel::check_targets(n_qubits, targets)
}
