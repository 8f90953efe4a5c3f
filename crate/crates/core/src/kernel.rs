//! Index arithmetic and in-place dense kernels shared by states, observables
//! and the gradient engine.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, C64};

/// Bit mask of `qubit` inside a basis index of an `n_qubits` register.
#[inline]
pub(crate) fn bit(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

pub(crate) fn check_targets(n_qubits: usize, targets: &[usize]) -> Result<()> {
    let mut seen = 0usize;
    for &q in targets {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange { qubit: q, n_qubits });
        }
        if seen & (1 << q) != 0 {
            return Err(Error::DuplicateQubit(q));
        }
        seen |= 1 << q;
    }
    Ok(())
}

/// Splits basis indices into a local part on `targets` and the rest.
///
/// `offsets[l]` is the full-register contribution of local index `l`
/// (targets[0] is the most significant local bit) and `rest` enumerates every
/// full index whose target bits are zero, in increasing order.
#[derive(Debug, Clone)]
pub(crate) struct Embedding {
    pub offsets: Vec<usize>,
    pub rest: Vec<usize>,
}

impl Embedding {
    pub fn new(n_qubits: usize, targets: &[usize]) -> Self {
        let k = targets.len();
        let offsets = (0..1usize << k)
            .map(|l| {
                targets
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| l & (1 << (k - 1 - j)) != 0)
                    .map(|(_, &q)| bit(n_qubits, q))
                    .sum()
            })
            .collect();
        let mask: usize = targets.iter().map(|&q| bit(n_qubits, q)).sum();
        let rest = (0..1usize << n_qubits).filter(|i| i & mask == 0).collect();
        Self { offsets, rest }
    }

    #[inline]
    pub fn local_dim(&self) -> usize {
        self.offsets.len()
    }
}

/// `v ← (U ⊗ I) v` for a state vector.
pub(crate) fn apply_vec(v: &mut [C64], u: &[C64], emb: &Embedding) {
    let d = emb.local_dim();
    let mut buf = vec![C64::new(0.0, 0.0); d];
    for &base in &emb.rest {
        for (l, b) in buf.iter_mut().enumerate() {
            *b = v[base + emb.offsets[l]];
        }
        for l in 0..d {
            let row = &u[l * d..(l + 1) * d];
            v[base + emb.offsets[l]] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
        }
    }
}

/// `M ← (U ⊗ I) M` for a row-major `dim × dim` matrix.
pub(crate) fn left_apply(m: &mut [C64], dim: usize, u: &[C64], emb: &Embedding) {
    let d = emb.local_dim();
    let mut rows = vec![vec![C64::new(0.0, 0.0); dim]; d];
    for &base in &emb.rest {
        for (l, row) in rows.iter_mut().enumerate() {
            let r = base + emb.offsets[l];
            row.copy_from_slice(&m[r * dim..(r + 1) * dim]);
        }
        for l in 0..d {
            let r = base + emb.offsets[l];
            let out = &mut m[r * dim..(r + 1) * dim];
            out.fill(C64::new(0.0, 0.0));
            for (k, row) in rows.iter().enumerate() {
                let coeff = u[l * d + k];
                if coeff.re == 0.0 && coeff.im == 0.0 {
                    continue;
                }
                for (o, x) in out.iter_mut().zip(row) {
                    *o += coeff * x;
                }
            }
        }
    }
}

/// `M ← M (U ⊗ I)` for a row-major `dim × dim` matrix.
pub(crate) fn right_apply(m: &mut [C64], dim: usize, u: &[C64], emb: &Embedding) {
    let d = emb.local_dim();
    let mut buf = vec![C64::new(0.0, 0.0); d];
    for row in m.chunks_exact_mut(dim) {
        for &base in &emb.rest {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = row[base + emb.offsets[k]];
            }
            for l in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (k, b) in buf.iter().enumerate() {
                    acc += b * u[k * d + l];
                }
                row[base + emb.offsets[l]] = acc;
            }
        }
    }
}

/// Conjugate transpose of a square row-major matrix.
pub(crate) fn dagger(u: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    for r in 0..d {
        for c in 0..d {
            out[c * d + r] = u[r * d + c].conj();
        }
    }
    out
}

pub(crate) fn matmul(a: &[C64], b: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    for r in 0..d {
        for k in 0..d {
            let x = a[r * d + k];
            for c in 0..d {
                out[r * d + c] += x * b[k * d + c];
            }
        }
    }
    out
}

pub(crate) fn kron(a: &[C64], da: usize, b: &[C64], db: usize) -> Vec<C64> {
    let d = da * db;
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    for ra in 0..da {
        for ca in 0..da {
            let x = a[ra * da + ca];
            for rb in 0..db {
                for cb in 0..db {
                    out[(ra * db + rb) * d + ca * db + cb] = x * b[rb * db + cb];
                }
            }
        }
    }
    out
}

/// Index map for a qubit permutation: new qubit `i` is old qubit `order[i]`.
/// Returns `map` with `new[a] = old[map[a]]`.
pub(crate) fn permutation_map(n_qubits: usize, order: &[usize]) -> Result<Vec<usize>> {
    if order.len() != n_qubits {
        return Err(Error::Length {
            expected: n_qubits,
            found: order.len(),
        });
    }
    check_targets(n_qubits, order)?;
    Ok((0..1usize << n_qubits)
        .map(|a| {
            order
                .iter()
                .enumerate()
                .filter(|&(i, _)| a & bit(n_qubits, i) != 0)
                .map(|(_, &old)| bit(n_qubits, old))
                .sum()
        })
        .collect())
}

/// Ascending list of the qubits of an `n_qubits` register not in `subset`.
pub(crate) fn complement(n_qubits: usize, subset: &[usize]) -> Vec<usize> {
    (0..n_qubits).filter(|q| !subset.contains(q)).collect()
}

#[inline]
pub(crate) fn max_abs(values: impl Iterator<Item = C64>) -> f64 {
    values.map(|z| libm::hypot(z.re, z.im)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_respects_msb_convention() {
        let emb = Embedding::new(3, &[0, 2]);
        assert_eq!(emb.offsets, vec![0, 1, 4, 5]);
        assert_eq!(emb.rest, vec![0, 2]);
        let emb = Embedding::new(3, &[2, 0]);
        assert_eq!(emb.offsets, vec![0, 4, 1, 5]);
    }

    #[test]
    fn permutation_map_swaps_bits() {
        // new qubit 0 = old qubit 1, new qubit 1 = old qubit 0
        let map = permutation_map(2, &[1, 0]).unwrap();
        assert_eq!(map, vec![0, 2, 1, 3]);
        assert!(permutation_map(2, &[1, 1]).is_err());
    }

    #[test]
    fn target_checks() {
        assert_eq!(
            check_targets(2, &[0, 2]),
            Err(Error::QubitOutOfRange {
                qubit: 2,
                n_qubits: 2
            })
        );
        assert_eq!(check_targets(3, &[1, 1]), Err(Error::DuplicateQubit(1)));
    }
}
