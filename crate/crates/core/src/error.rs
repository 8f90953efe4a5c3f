use alloc::string::String;

use crate::MAX_QUBITS;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("qubit count {0} outside the supported range 1..={max}", max = MAX_QUBITS)]
    QubitCount(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("qubit {0} listed more than once")]
    DuplicateQubit(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not unitary (max |G†G - I| = {0:e})")]
    NotUnitary(f64),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("invalid qubit subset: {0}")]
    Subset(&'static str),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("inconsistent architecture: {0}")]
    Schedule(String),
    #[error("parameter layout mismatch: expected {expected} values, found {found}")]
    Layout { expected: usize, found: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    Length { expected: usize, found: usize },
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("invalid setting `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("parameter {0} does not enter through a shift-eligible rotation")]
    NotShiftEligible(usize),
    #[error("empty batch")]
    EmptyBatch,
}

pub type Result<T> = core::result::Result<T, Error>;
