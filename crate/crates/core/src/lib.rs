//! Simulation core for a hybrid quantum repeater chain built from single-atom
//! photon transducers and multimode ensemble memories.

pub mod chain;
pub mod emitter;
pub mod keyrate;
pub mod linklayer;
pub mod qstate;
pub mod rng;

pub use chain::{ChainConfig, ChainError, TrialResult};
pub use emitter::{EmitterError, EmitterParams};
pub use keyrate::{binary_entropy, secret_key_rate, KeyRateResult, SweepGrid};
pub use linklayer::LinkParams;
pub use qstate::{bell_state, fidelity, BellIndex, Pauli, PauliFrame, QStateError, TwoQubitState};
