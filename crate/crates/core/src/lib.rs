//! Quantum error mitigation on simulated noisy devices.
//!
//! The crate implements Pauli error cancellation (PEC), noiseless output
//! extrapolation (NOX) and readout error mitigation on top of a trajectory
//! simulator and an exact density-matrix engine, together with a cycle
//! benchmarking pipeline that reconstructs Pauli error rates.
//!
//! Dense kernels are generic over [`Real`] (`f32`/`f64`); the aliases at the
//! crate root fix the working precision to `f64`.

pub mod cer;
pub mod circuit;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod mitigation;
pub mod noise;
pub mod pauli;
pub mod rc;
pub mod scalar;
pub mod simulator;

pub use circuit::{Circuit, Cycle, EasyCycle, GateSpec, HardCycle, Observable, TwoQubitGate, TwoQubitKind};
pub use error::{Error, Result};
pub use noise::{channel_power, effective_pauli_channel, sample_error, CoherentNoise, CycleNoise, NoiseModel};
pub use pauli::{conjugate_by_cycle, pauli_mul, symplectic_inner, Pauli, PauliString, Phase};
pub use scalar::Real;

pub type PauliChannel = noise::PauliChannel<f64>;
pub type PauliChannel32 = noise::PauliChannel<f32>;
pub type Matrix = linalg::CMatrix<f64>;
