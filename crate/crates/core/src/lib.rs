//! Fibonacci Hamiltonian toolkit.
//!
//! Exact word combinatorics of the Fibonacci hull, transfer-matrix traces
//! and norms, trace-condition band spectra, and Abel-averaged wavepacket
//! dynamics for the operator
//! `(Hφ)(n) = φ(n+1) + φ(n−1) + λ v_θ(n) φ(n)` on ℓ²(ℤ).

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod phase;
pub mod words;
pub mod ext;
pub mod transfer;
pub mod tridiag;
pub mod spectrum;
pub mod dynamics;
pub mod output;
