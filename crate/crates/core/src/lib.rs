#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Recurrence entanglement purification of two-qubit states in the Bell basis.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the yield module also
//! accepts exact rationals. The `*64`/`*32` aliases fix the scalar.

pub mod analytic;
pub mod bellmat;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod protocols;
pub mod scalar;
pub mod yieldsim;

pub use bellmat::{
    apply_local_gate, bell_basis, bell_fidelities, bell_from_computational, concurrence, is_x_state, purity, Basis, BellDensityMatrix,
    BellState, ComputationalDensityMatrix, GateLabel, LocalGate, Pauli, StateFile,
};
pub use error::{EppError, Result};
pub use linalg::Mat4;
pub use protocols::{run, Options, ProtocolKind, PurificationResult, Status, Target};
pub use scalar::{Cx, Real};

pub type BellDensityMatrix64 = BellDensityMatrix<f64>;
pub type BellDensityMatrix32 = BellDensityMatrix<f32>;
pub type ComputationalDensityMatrix64 = ComputationalDensityMatrix<f64>;
pub type ComputationalDensityMatrix32 = ComputationalDensityMatrix<f32>;
pub type LocalGate64 = LocalGate<f64>;
pub type LocalGate32 = LocalGate<f32>;
pub type Mat4f64 = Mat4<f64>;
pub type Mat4f32 = Mat4<f32>;
pub type PurificationResult64 = PurificationResult<f64>;
pub type PurificationResult32 = PurificationResult<f32>;
pub type Options64 = Options<f64>;
pub type Options32 = Options<f32>;
