//! Pure and mixed register states with gate application, tensor products,
//! partial traces and Pauli-Z readout.
//!
//! Every operation returns a new value; states are never mutated in place
//! through the public API.

pub(crate) mod mixed;
mod pure;

pub use mixed::MixedState;
pub use pure::PureState;

use crate::{Error, Result, MAX_QUBITS};

/// Tolerance for the unit-norm and unit-trace invariants.
pub const STATE_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted when checking positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-8;

pub(crate) fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n_qubits) {
        Ok(())
    } else {
        Err(Error::QubitCount(n_qubits))
    }
}

/// Sign of `Z_q` on basis state `index`.
#[inline]
pub(crate) fn z_sign(n_qubits: usize, qubit: usize, index: usize) -> f64 {
    if index & crate::kernel::bit(n_qubits, qubit) == 0 {
        1.0
    } else {
        -1.0
    }
}
