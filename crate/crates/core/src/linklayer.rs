//! Loss, timing and memory bookkeeping for one elementary segment.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error("link.{field} = {value} violates {bound}")]
    Invalid {
        field: &'static str,
        value: f64,
        bound: &'static str,
    },
}

/// How many detector efficiencies enter a heralded midpoint click pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DetectorCount {
    Single,
    #[default]
    Double,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// km
    pub segment_length: f64,
    /// dB/km
    pub attenuation: f64,
    /// km/s
    pub light_speed: f64,
    /// Hz
    pub repetition_rate: f64,
    pub detector_efficiency: f64,
    pub detector_count: DetectorCount,
    pub pair_success: f64,
    /// s
    pub memory_t2: f64,
    /// `None` means "as many as continuous operation needs".
    pub n_modes: Option<u64>,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            segment_length: 0.0,
            attenuation: 0.2,
            light_speed: 2.0e5,
            repetition_rate: 1.0e6,
            detector_efficiency: 0.99,
            detector_count: DetectorCount::Double,
            pair_success: 0.49,
            memory_t2: 2.6e-3,
            n_modes: None,
        }
    }
}

fn check(field: &'static str, value: f64, ok: bool, bound: &'static str) -> Result<(), LinkError> {
    if ok {
        Ok(())
    } else {
        Err(LinkError::Invalid { field, value, bound })
    }
}

fn is_prob(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        let s = self;
        check("segment_length", s.segment_length, s.segment_length >= 0.0, ">= 0")?;
        check("attenuation_db_per_km", s.attenuation, s.attenuation >= 0.0, ">= 0")?;
        check("light_speed_km_per_s", s.light_speed, s.light_speed > 0.0, "> 0")?;
        check("repetition_rate_hz", s.repetition_rate, s.repetition_rate > 0.0, "> 0")?;
        check("detector_efficiency", s.detector_efficiency, is_prob(s.detector_efficiency), "[0, 1]")?;
        check("pair_success", s.pair_success, is_prob(s.pair_success), "[0, 1]")?;
        check("memory_t2_s", s.memory_t2, s.memory_t2 > 0.0, "> 0")?;
        if let Some(n) = s.n_modes {
            check("n_modes", n as f64, n >= 1, ">= 1")?;
        }
        Ok(())
    }

    /// One-way heralding delay: photon to the midpoint and the answer back.
    pub fn herald_latency(&self) -> f64 {
        self.segment_length / self.light_speed
    }

    /// Modes needed to keep attempting while heralds are in flight.
    pub fn required_modes(&self) -> u64 {
        modes_for(self.repetition_rate, self.segment_length, self.light_speed)
    }

    /// Modes actually available to the segment.
    pub fn effective_modes(&self) -> u64 {
        self.n_modes.unwrap_or_else(|| self.required_modes()).max(1)
    }
}

fn modes_for(rate: f64, length: f64, speed: f64) -> u64 {
    let x = rate * length / speed;
    // Guard against 499.99999 style round-off on exact ratios.
    let r = x.round();
    let n = if (x - r).abs() < 1e-9 * r.max(1.0) { r } else { x.ceil() };
    (n as u64).max(1)
}

/// Power transmission of `length` km of fiber.
pub fn fiber_transmission(length: f64, attenuation: f64) -> f64 {
    10f64.powf(-attenuation * length / 10.0)
}

/// Probability that a single attempt heralds a segment pair.
pub fn attempt_success_prob(p: &LinkParams) -> f64 {
    let t = fiber_transmission(p.segment_length / 2.0, p.attenuation);
    let eta = match p.detector_count {
        DetectorCount::Single => p.detector_efficiency,
        DetectorCount::Double => p.detector_efficiency * p.detector_efficiency,
    };
    p.pair_success * t * t * eta
}

/// Draws a 1-based geometric slot index for success probability `p_att`.
pub fn sample_geometric<R: Rng + ?Sized>(p_att: f64, rng: &mut R) -> u64 {
    if p_att >= 1.0 {
        return 1;
    }
    // Inversion: P(K > k) = (1-p)^k.
    let u: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let k = (u.ln() / (-p_att).ln_1p()).ceil();
    if k < 1.0 {
        1
    } else if k >= u64::MAX as f64 {
        u64::MAX
    } else {
        k as u64
    }
}

/// Same draw as [`sample_geometric`] without the `u64` ceiling, for links
/// whose expected wait exceeds `2^64` slots.
pub fn sample_slots<R: Rng + ?Sized>(p_att: f64, rng: &mut R) -> f64 {
    if p_att >= 1.0 {
        return 1.0;
    }
    let u: f64 = 1.0 - rng.gen::<f64>();
    (u.ln() / (-p_att).ln_1p()).ceil().max(1.0)
}

/// Slot of the first heralded success and the time its herald arrives.
pub fn sample_entanglement_time<R: Rng + ?Sized>(
    p_att: f64,
    p: &LinkParams,
    rng: &mut R,
) -> (u64, f64) {
    let slot = sample_geometric(p_att, rng);
    let t = slot as f64 / p.repetition_rate + p.herald_latency();
    (slot, t)
}

/// Memory modes per segment for a chain of `n_segments` over `total_length`.
pub fn memory_modes_required(total_length: f64, n_segments: u32, p: &LinkParams) -> u64 {
    assert!(n_segments >= 1, "n_segments must be >= 1");
    modes_for(
        p.repetition_rate,
        total_length / n_segments as f64,
        p.light_speed,
    )
}

/// Normalized retrieval efficiency after `storage_time` in the ensemble memory.
pub fn retrieval_efficiency(storage_time: f64, memory_t2: f64) -> f64 {
    (-4.0 * storage_time / memory_t2).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(len: f64) -> LinkParams {
        LinkParams {
            segment_length: len,
            ..LinkParams::default()
        }
    }

    #[test]
    fn transmission_values() {
        assert_eq!(fiber_transmission(0.0, 0.2), 1.0);
        assert_relative_eq!(fiber_transmission(50.0, 0.2), 0.1, max_relative = 1e-12);
        assert_relative_eq!(fiber_transmission(10.0, 0.2), 0.630957, max_relative = 1e-6);
    }

    #[test]
    fn attempt_probability() {
        let mut p = params(0.0);
        p.detector_efficiency = 1.0;
        assert_relative_eq!(attempt_success_prob(&p), 0.49, max_relative = 1e-12);
        let p = params(100.0);
        assert_relative_eq!(
            attempt_success_prob(&p),
            0.49 * 0.01 * 0.99 * 0.99,
            max_relative = 1e-12
        );
        let single = LinkParams {
            detector_count: DetectorCount::Single,
            ..params(100.0)
        };
        assert_relative_eq!(attempt_success_prob(&single), 0.49 * 0.01 * 0.99, max_relative = 1e-12);
        let zero = LinkParams {
            pair_success: 0.0,
            ..params(10.0)
        };
        assert_eq!(attempt_success_prob(&zero), 0.0);
    }

    #[test]
    fn herald_latency_is_one_traversal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = params(100.0);
        for _ in 0..10 {
            let (slot, t) = sample_entanglement_time(0.3, &p, &mut rng);
            assert_relative_eq!(t - slot as f64 / 1e6, 5e-4, max_relative = 1e-9);
        }
        assert_eq!(sample_entanglement_time(1.0, &p, &mut rng).0, 1);
    }

    #[test]
    fn mode_counts() {
        let p = LinkParams::default();
        assert_eq!(memory_modes_required(1000.0, 10, &p), 500);
        assert_eq!(memory_modes_required(1000.0, 8, &p), 625);
        assert_eq!(memory_modes_required(1000.0, 6, &p), 834);
        assert_eq!(memory_modes_required(1000.0, 5000, &p), 1);
    }

    #[test]
    fn retrieval_values() {
        assert_eq!(retrieval_efficiency(0.0, 2.6e-3), 1.0);
        assert_relative_eq!(retrieval_efficiency(2.6e-3 / 4.0, 2.6e-3), (-1f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(retrieval_efficiency(2.6e-3, 2.6e-3), (-4f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn validation_names_field() {
        let p = LinkParams {
            detector_efficiency: 1.5,
            ..LinkParams::default()
        };
        let e = p.validate().unwrap_err().to_string();
        assert!(e.contains("detector_efficiency"), "{e}");
    }
}
