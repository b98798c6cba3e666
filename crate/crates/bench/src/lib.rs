//! Fixtures shared by the kernel benchmarks.

use hyrep::chain::ChainConfig;
use hyrep::emitter::{DriveProfile, DriveTemplate, EmitterParams};

/// Default emitter with the uncalibrated template drive.
pub fn emitter() -> (EmitterParams, DriveProfile) {
    let drive = DriveTemplate::default()
        .profile()
        .expect("default template is valid");
    (EmitterParams::default(), drive)
}

/// 1000 km chain with seven repeaters and a short trial.
pub fn chain(successes: u32) -> ChainConfig {
    ChainConfig {
        successes_per_trial: successes,
        n_trials: 1,
        n_transfer_rb: 2,
        ..ChainConfig::default()
    }
}
