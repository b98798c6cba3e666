//! Monte Carlo model of the full repeater chain: heralded generation per
//! segment, transfer into transducer spins, cutoff, swapping and
//! end-to-end bookkeeping.

mod engine;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linklayer::{attempt_success_prob, LinkError, LinkParams};
use crate::qstate::{qber, BellIndex, Mat4, QStateError, TwoQubitState, C64};

pub use engine::{run_trial, run_trial_logged, EventKind, EventRecord};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("invalid chain config: {0}")]
    Config(String),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    State(#[from] QStateError),
    #[error("event log: {0}")]
    Log(#[from] std::io::Error),
}

/// When two links meet at a repeater they are swapped immediately; the
/// oldest available link on each side goes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapPolicy {
    #[default]
    Asap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// km
    pub total_length: f64,
    pub n_repeaters: u32,
    /// Transducers on each side of every repeater.
    pub n_transfer_rb: u32,
    pub swap_error: f64,
    pub swap_success: f64,
    /// s
    pub swap_time: f64,
    pub transfer_success: f64,
    /// s
    pub spin_coherence: f64,
    /// s
    pub cutoff: f64,
    /// Segment length is overwritten from `total_length / n_segments`.
    pub link: LinkParams,
    pub pair_state: TwoQubitState,
    pub successes_per_trial: u32,
    pub n_trials: u32,
    pub seed: u64,
    pub policy: SwapPolicy,
    /// Per-trial event cap; a trial that hits it reports what it has.
    pub event_budget: u64,
    /// Replaces the per-attempt success probability from the link model:
    /// one value for every segment, or one per segment.
    pub attempt_prob_override: Option<Vec<f64>>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            total_length: 1000.0,
            n_repeaters: 7,
            n_transfer_rb: 1,
            swap_error: 1e-3,
            swap_success: 0.92,
            swap_time: 2e-7,
            transfer_success: 0.95,
            spin_coherence: 1.0,
            cutoff: 1e-2,
            link: LinkParams::default(),
            pair_state: TwoQubitState::reference_pair(),
            successes_per_trial: 100,
            n_trials: 10,
            seed: 1,
            policy: SwapPolicy::Asap,
            event_budget: 20_000_000,
            attempt_prob_override: None,
        }
    }
}

fn prob(name: &str, v: f64) -> Result<(), ChainError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ChainError::Config(format!("{name} must be in [0, 1], got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), ChainError> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(ChainError::Config(format!("{name} must be > 0, got {v}")))
    }
}

impl ChainConfig {
    pub fn n_segments(&self) -> u32 {
        self.n_repeaters + 1
    }

    pub fn segment_length(&self) -> f64 {
        self.total_length / self.n_segments() as f64
    }

    /// Link parameters of one elementary segment.
    pub fn segment_link(&self) -> LinkParams {
        LinkParams {
            segment_length: self.segment_length(),
            ..self.link.clone()
        }
    }

    pub fn attempt_prob(&self) -> f64 {
        self.segment_attempt_prob(0)
    }

    pub fn segment_attempt_prob(&self, seg: usize) -> f64 {
        match self.attempt_prob_override.as_deref() {
            Some([p]) => *p,
            Some(ps) => ps.get(seg).copied().unwrap_or(f64::NAN),
            None => attempt_success_prob(&self.segment_link()),
        }
    }

    /// Time between attempts; stretched when too few memory modes are
    /// available to cover the herald round trip.
    pub fn slot_time(&self) -> f64 {
        let l = self.segment_link();
        let base = 1.0 / l.repetition_rate;
        let modes = l.effective_modes() as f64;
        base.max(l.herald_latency() / modes)
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if !(self.total_length >= 0.0) {
            return Err(ChainError::Config(format!(
                "total_length must be >= 0, got {}",
                self.total_length
            )));
        }
        if self.n_transfer_rb < 1 {
            return Err(ChainError::Config("n_transfer_rb must be >= 1".into()));
        }
        prob("swap_error", self.swap_error)?;
        prob("swap_success", self.swap_success)?;
        prob("transfer_success", self.transfer_success)?;
        if !(self.swap_time >= 0.0) {
            return Err(ChainError::Config(format!("swap_time must be >= 0, got {}", self.swap_time)));
        }
        positive("spin_coherence", self.spin_coherence)?;
        positive("cutoff", self.cutoff)?;
        if self.successes_per_trial < 1 || self.n_trials < 1 {
            return Err(ChainError::Config(
                "successes_per_trial and n_trials must be >= 1".into(),
            ));
        }
        if self.event_budget < 1 {
            return Err(ChainError::Config("event_budget must be >= 1".into()));
        }
        self.segment_link().validate()?;
        self.pair_state.validate()?;
        if let Some(ps) = &self.attempt_prob_override {
            if ps.len() != 1 && ps.len() != self.n_segments() as usize {
                return Err(ChainError::Config(format!(
                    "attempt_prob_override needs 1 or {} values, got {}",
                    self.n_segments(),
                    ps.len()
                )));
            }
        }
        for seg in 0..self.n_segments() as usize {
            let p = self.segment_attempt_prob(seg);
            if !(p > 0.0 && p <= 1.0) {
                return Err(ChainError::Config(format!(
                    "per-attempt success probability of segment {seg} is {p:e}; no entanglement can ever be heralded"
                )));
            }
        }
        Ok(())
    }
}

/// Lifecycle of a segment's entanglement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStage {
    Idle,
    Generating,
    StoredInMemory,
    TransferredToSpin,
    Consumed,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLink {
    pub stage: LinkStage,
    pub creation_time: f64,
    pub herald_time: f64,
    pub transfer_time: f64,
    pub pair: TwoQubitState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Time of the last end-to-end success (or of the last event when the
    /// budget ran out).
    pub total_time: f64,
    pub end_to_end_states: Vec<TwoQubitState>,
    /// Time since the previous success, per success.
    pub latencies: Vec<f64>,
    /// False when the event budget ended the trial early.
    pub completed: bool,
    pub events: u64,
}

impl TrialResult {
    pub fn successes(&self) -> usize {
        self.end_to_end_states.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    /// Per-trial `successes / T_i`.
    pub rates: Vec<f64>,
    /// Mean of the per-trial rates.
    pub r_suc: f64,
    pub r_suc_stderr: f64,
    /// Total successes over total time.
    pub r_suc_pooled: f64,
    pub q_z: f64,
    pub q_x: f64,
    pub mean_state: Option<TwoQubitState>,
    pub total_successes: usize,
    pub incomplete_trials: usize,
}

/// Combines trials; symmetric in their order.
pub fn aggregate(trials: &[TrialResult]) -> Result<AggregateResult, ChainError> {
    if trials.is_empty() {
        return Err(ChainError::Config("no trials to aggregate".into()));
    }
    let rates: Vec<f64> = trials
        .iter()
        .map(|t| {
            if t.total_time > 0.0 {
                t.successes() as f64 / t.total_time
            } else {
                0.0
            }
        })
        .collect();
    let n = rates.len() as f64;
    let r_suc = rates.iter().sum::<f64>() / n;
    let stderr = if rates.len() > 1 {
        (rates.iter().map(|r| (r - r_suc).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    let total_time: f64 = trials.iter().map(|t| t.total_time).sum();
    let total_successes: usize = trials.iter().map(TrialResult::successes).sum();
    let r_suc_pooled = if total_time > 0.0 {
        total_successes as f64 / total_time
    } else {
        0.0
    };
    // Pool in the frame-corrected basis so that Pauli frames never mix.
    let mut acc = Mat4::zeros();
    for t in trials {
        for s in &t.end_to_end_states {
            acc += s.folded().matrix;
        }
    }
    let (mean_state, q_z, q_x) = if total_successes > 0 {
        let m = acc / C64::new(total_successes as f64, 0.0);
        let st = TwoQubitState::new(m)?;
        let (qz, qx) = qber(&st, BellIndex::PSI_PLUS);
        (Some(st), qz, qx)
    } else {
        (None, 0.5, 0.5)
    };
    Ok(AggregateResult {
        rates,
        r_suc,
        r_suc_stderr: stderr,
        r_suc_pooled,
        q_z,
        q_x,
        mean_state,
        total_successes,
        incomplete_trials: trials.iter().filter(|t| !t.completed).count(),
    })
}

/// Runs `n_trials` independent trials in parallel, each on its own stream.
pub fn run_chain(config: &ChainConfig) -> Result<(Vec<TrialResult>, AggregateResult), ChainError> {
    use rayon::prelude::*;
    config.validate()?;
    let trials: Vec<TrialResult> = (0..config.n_trials)
        .into_par_iter()
        .map(|i| run_trial(config, i as u64))
        .collect::<Result<_, _>>()?;
    let agg = aggregate(&trials)?;
    Ok((trials, agg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSegmentOracle {
    /// Expected attempt slots until both segments have heralded.
    pub expected_slots: f64,
    /// Expected time to the first end-to-end success.
    pub expected_time: f64,
}

/// Closed form for one repeater with certain transfer and swap and no
/// cutoff: the first success waits for the later of two geometric heralds.
pub fn analytic_two_segment_oracle(config: &ChainConfig) -> Result<TwoSegmentOracle, ChainError> {
    if config.n_repeaters != 1 {
        return Err(ChainError::Config("oracle needs exactly one repeater".into()));
    }
    let (p1, p2) = (config.segment_attempt_prob(0), config.segment_attempt_prob(1));
    if !(p1 > 0.0 && p1 <= 1.0 && p2 > 0.0 && p2 <= 1.0) {
        return Err(ChainError::Config(format!("attempt probabilities {p1}, {p2} out of (0, 1]")));
    }
    let slots = expected_max_geometric(p1, p2);
    let l = config.segment_link();
    Ok(TwoSegmentOracle {
        expected_slots: slots,
        expected_time: l.herald_latency() + slots * config.slot_time() + config.swap_time,
    })
}

/// `E[max(G1, G2)]` for independent geometric variables on `{1, 2, ...}`.
pub fn expected_max_geometric(p1: f64, p2: f64) -> f64 {
    1.0 / p1 + 1.0 / p2 - 1.0 / (p1 + p2 - p1 * p2)
}
