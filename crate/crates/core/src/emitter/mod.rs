//! Open-system model of the rubidium dual-cavity photon-pair emitter.

pub mod calibrate;
pub mod drive;
pub mod integrate;
pub mod levels;
pub mod operators;
pub mod params;
pub mod pair;
pub mod spectrum;

use thiserror::Error;

pub use calibrate::{calibrate_pause, find_sweet_spot, Calibration, SweetSpot};
pub use drive::{DriveProfile, DriveSegment, DriveTemplate};
pub use integrate::{evolve, evolve_coherent, EmissionRecord, InitialState, PhotonKind};
pub use levels::CgTable;
pub use operators::{build_hamiltonian, build_lindblads, SystemOperator};
pub use params::{Cooperativity, Couplings, EmitterParams};
pub use pair::{elementary_pair_model, PairModelResult};
pub use spectrum::{dressed_spectrum, effective_lambda, scan_detuning, ScanPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmitterError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("calibration did not converge: {0}")]
    Calibration(String),
}
