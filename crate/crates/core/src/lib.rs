//! Dense state-vector and density-matrix simulation of quantum fully
//! convolutional networks (QFCN), together with the gradient-descent trainer
//! and the hybrid quantum/classical baseline.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, plotting and
//! the command-line driver live in the `qfcn` crate.
//!
//! Qubit indexing is fixed across every module: the basis index of the bit
//! string `b_0 b_1 … b_{n-1}` is `Σ_q b_q · 2^(n-1-q)`, so qubit 0 is the most
//! significant bit.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod circuit;
pub mod data;
mod error;
pub mod gates;
pub mod hybrid;
mod kernel;
pub mod qstate;
pub mod training;

pub use error::{Error, Result};

/// Complex scalar used for every amplitude and matrix entry.
pub type C64 = num_complex::Complex64;

/// Largest register the simulator accepts. A 12-qubit density matrix holds
/// 2^24 complex entries (256 MiB).
pub const MAX_QUBITS: usize = 12;
