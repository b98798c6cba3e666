//! Heralded entanglement between two emitters via a midpoint time-bin
//! Bell measurement on their telecom photons.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::drive::DriveProfile;
use super::integrate::{evolve_coherent, integrate_until, EmissionRecord, InitialState, PhotonKind};
use super::params::{Cooperativity, Couplings, EmitterParams};
use super::EmitterError;
use crate::qstate::{fidelity, BellIndex, Mat4, PauliFrame, TwoQubitState, C64};
use crate::rng;

/// Detection-moment pairs drawn per cooperativity sample.
pub const MOMENTS_PER_SAMPLE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModelResult {
    /// Probability that the midpoint sees one early and one late click.
    pub p_success: f64,
    pub p_success_stderr: f64,
    /// Post-selected visible-visible state, sign folded to `Ψ+`.
    pub rho0: TwoQubitState,
    pub fidelity: f64,
    pub n_samples: usize,
}

/// Gaussian draw truncated at three standard deviations.
pub fn sample_cooperativity<R: Rng + ?Sized>(c: Cooperativity, rng: &mut R) -> f64 {
    if c.std == 0.0 {
        return c.mean;
    }
    let n = Normal::new(c.mean, c.std).expect("std is finite and non-negative");
    loop {
        let x = n.sample(rng);
        if (x - c.mean).abs() <= 3.0 * c.std {
            return x;
        }
    }
}

pub fn sample_couplings<R: Rng + ?Sized>(params: &EmitterParams, rng: &mut R) -> Couplings {
    let ct = sample_cooperativity(params.coop_t, rng);
    let co = sample_cooperativity(params.coop_o, rng);
    Couplings {
        g_t: params.g_t_from(ct),
        g_o: params.g_o_from(co),
    }
}

fn coherent(r: &EmissionRecord) -> &[f64] {
    if r.coherent_flux.len() == r.times.len() {
        &r.coherent_flux
    } else {
        &r.flux[PhotonKind::Telecom as usize]
    }
}

/// Flux profile restricted to one bin, with a cumulative table for inverse
/// transform sampling.
struct BinProfile<'a> {
    times: &'a [f64],
    lo: usize,
    hi: usize,
    right: [&'a [f64]; 2],
    phase: [&'a [f64]; 2],
    total: [Vec<f64>; 2],
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl<'a> BinProfile<'a> {
    fn new(r1: &'a EmissionRecord, r2: &'a EmissionRecord, lo: usize, hi: usize) -> Self {
        let t = PhotonKind::Telecom as usize;
        let f = PhotonKind::FaultyTelecom as usize;
        let total: [Vec<f64>; 2] = [
            (0..r1.times.len()).map(|i| r1.flux[t][i] + r1.flux[f][i]).collect(),
            (0..r2.times.len()).map(|i| r2.flux[t][i] + r2.flux[f][i]).collect(),
        ];
        let density: Vec<f64> = (0..r1.times.len()).map(|i| total[0][i] + total[1][i]).collect();
        // Piecewise-linear density: cumulative trapezoids over [lo, hi].
        let mut cdf = vec![0.0; hi - lo + 1];
        for k in 1..cdf.len() {
            let i = lo + k;
            cdf[k] = cdf[k - 1] + 0.5 * (density[i - 1] + density[i]) * (r1.times[i] - r1.times[i - 1]);
        }
        BinProfile {
            times: &r1.times,
            lo,
            hi,
            right: [coherent(r1), coherent(r2)],
            phase: [&r1.telecom_phase, &r2.telecom_phase],
            total,
            density,
            cdf,
        }
    }

    fn mass(&self) -> f64 {
        *self.cdf.last().unwrap_or(&0.0)
    }

    /// Draws a time with density proportional to the summed telecom flux and
    /// returns (grid cell, fraction within cell, normalized density there).
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(usize, f64, f64)> {
        let m = self.mass();
        if m <= 0.0 || self.hi <= self.lo {
            return None;
        }
        let u = rng.gen::<f64>() * m;
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let i = self.lo + k;
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (d0, d1) = (self.density[i - 1], self.density[i]);
        let h = t1 - t0;
        let need = u - self.cdf[k - 1];
        // Solve d0 x h + (d1 - d0) x^2 h / 2 = need for x in [0, 1].
        let a = 0.5 * (d1 - d0) * h;
        let b = d0 * h;
        let x = if a.abs() < 1e-14 * b.abs().max(1e-300) {
            if b > 0.0 { need / b } else { 0.5 }
        } else {
            let disc = (b * b + 4.0 * a * need).max(0.0);
            (-b + disc.sqrt()) / (2.0 * a)
        }
        .clamp(0.0, 1.0);
        let dens = d0 + x * (d1 - d0);
        if dens <= 0.0 {
            return None;
        }
        Some((i, x, dens / m))
    }

    /// Optical phase of the left emitter minus that of the right one.
    fn phase_diff(&self, i: usize, x: f64) -> f64 {
        let at = |p: &[f64]| {
            if p.len() <= i {
                return 0.0;
            }
            // Interpolate across the shorter arc.
            let d = (p[i] - p[i - 1] + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
            p[i - 1] + x * d
        };
        at(self.phase[0]) - at(self.phase[1])
    }

    fn value(v: &[f64], i: usize, x: f64) -> f64 {
        v[i - 1] + x * (v[i] - v[i - 1])
    }
}

/// Contribution of one emitter pair: exact success probability and a Monte
/// Carlo estimate of the unnormalized post-selected state.
#[derive(Debug, Clone)]
pub struct PairSample {
    pub p_success: f64,
    pub rho: Mat4,
}

/// Combines the emission records of the left and right emitter.
///
/// Detection moments are drawn from the summed telecom flux in each bin and
/// importance-weighted; right-photon amplitudes interfere, faulty photons
/// add incoherently to the populations.
pub fn combine_records<R: Rng + ?Sized>(
    left: &EmissionRecord,
    right: &EmissionRecord,
    moments: usize,
    rng: &mut R,
) -> Result<PairSample, EmitterError> {
    if left.times != right.times {
        return Err(EmitterError::Config(
            "emission records must share a time grid".into(),
        ));
    }
    let t = PhotonKind::Telecom as usize;
    let f = PhotonKind::FaultyTelecom as usize;
    let pe = |r: &EmissionRecord| r.early[t] + r.early[f];
    let pl = |r: &EmissionRecord| r.late[t] + r.late[f];
    let p_success = pe(left) * pl(right) + pl(left) * pe(right);

    let b = left.index_at(left.bin_boundary);
    let n = left.times.len() - 1;
    let early = BinProfile::new(left, right, 0, b.min(n));
    let late = BinProfile::new(left, right, b.min(n), n);
    let mut rho = Mat4::zeros();
    if moments == 0 {
        return Ok(PairSample { p_success, rho });
    }
    let mut acc = [0.0f64; 2];
    let mut coh = C64::new(0.0, 0.0);
    let mut used = 0usize;
    for _ in 0..moments {
        let (Some((ie, xe, qe)), Some((il, xl, ql))) = (early.sample(rng), late.sample(rng)) else {
            continue;
        };
        used += 1;
        let w = 1.0 / (qe * ql);
        let v = BinProfile::value;
        let t1e = v(&early.total[0], ie, xe);
        let t2e = v(&early.total[1], ie, xe);
        let t1l = v(&late.total[0], il, xl);
        let t2l = v(&late.total[1], il, xl);
        let a1e = v(early.right[0], ie, xe).max(0.0);
        let a2e = v(early.right[1], ie, xe).max(0.0);
        let a1l = v(late.right[0], il, xl).max(0.0);
        let a2l = v(late.right[1], il, xl).max(0.0);
        let dphi = early.phase_diff(ie, xe) - late.phase_diff(il, xl);
        // |EL>: left early, right late. |LE>: left late, right early.
        acc[0] += w * t1e * t2l;
        acc[1] += w * t1l * t2e;
        coh += C64::from_polar(w * (a1e * a2l * a1l * a2e).sqrt(), dphi);
    }
    if used > 0 {
        let s = 1.0 / used as f64;
        rho[(1, 1)] = C64::new(acc[0] * s, 0.0);
        rho[(2, 2)] = C64::new(acc[1] * s, 0.0);
        rho[(1, 2)] = coh * s;
        rho[(2, 1)] = rho[(1, 2)].conj();
    }
    Ok(PairSample { p_success, rho })
}

/// Deterministic counterpart of [`combine_records`]: the double integral
/// factorizes, so every term is a product of single-bin integrals.
pub fn combine_records_exact(left: &EmissionRecord, right: &EmissionRecord) -> PairSample {
    let t = PhotonKind::Telecom as usize;
    let f = PhotonKind::FaultyTelecom as usize;
    let pe = |r: &EmissionRecord| r.early[t] + r.early[f];
    let pl = |r: &EmissionRecord| r.late[t] + r.late[f];
    let p_success = pe(left) * pl(right) + pl(left) * pe(right);
    let (cl, cr) = (coherent(left), coherent(right));
    let overlap: Vec<f64> = (0..left.times.len())
        .map(|i| (cl[i].max(0.0) * cr[i].max(0.0)).sqrt())
        .collect();
    let b = left.bin_boundary;
    let oe = integrate_until(&left.times, &overlap, b);
    let ol = integrate_until(&left.times, &overlap, f64::INFINITY) - oe;
    let mut rho = Mat4::zeros();
    rho[(1, 1)] = C64::new(pe(left) * pl(right), 0.0);
    rho[(2, 2)] = C64::new(pl(left) * pe(right), 0.0);
    rho[(1, 2)] = C64::new(oe * ol, 0.0);
    rho[(2, 1)] = rho[(1, 2)];
    PairSample { p_success, rho }
}

/// Normalizes an accumulated unnormalized state.
pub fn normalize_pair(rho: &Mat4) -> Result<TwoQubitState, EmitterError> {
    let tr = rho.trace().re;
    if !(tr > 0.0) {
        return Err(EmitterError::Domain("no heralded weight accumulated".into()));
    }
    Ok(TwoQubitState::from_raw(rho / C64::new(tr, 0.0), PauliFrame::IDENTITY))
}

/// Monte Carlo over pairs of independently fluctuating emitters.
pub fn elementary_pair_model(
    params: &EmitterParams,
    drive: &DriveProfile,
    n_samples: usize,
    seed: u64,
) -> Result<PairModelResult, EmitterError> {
    if n_samples < 1 {
        return Err(EmitterError::Config("n_samples must be >= 1".into()));
    }
    params.validate()?;
    let samples: Vec<PairSample> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let g1 = sample_couplings(params, &mut r);
            let g2 = sample_couplings(params, &mut r);
            let e1 = evolve_coherent(params, drive, g1, &InitialState::Ground, None)?;
            let e2 = evolve_coherent(params, drive, g2, &InitialState::Ground, None)?;
            combine_records(&e1, &e2, MOMENTS_PER_SAMPLE, &mut r)
        })
        .collect::<Result<_, _>>()?;
    Ok(summarize(&samples))
}

pub fn summarize(samples: &[PairSample]) -> PairModelResult {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.p_success).sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s.p_success - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut acc = Mat4::zeros();
    for s in samples {
        acc += s.rho;
    }
    let rho0 = normalize_pair(&acc).unwrap_or_else(|_| TwoQubitState::maximally_mixed());
    let fid = fidelity(&rho0, BellIndex::PSI_PLUS);
    PairModelResult {
        p_success: mean,
        p_success_stderr: (var / n).sqrt(),
        rho0,
        fidelity: fid,
        n_samples: samples.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::bell_state;
    use rand::SeedableRng;

    /// Exponential pulses starting at 0 and at `t_late`, each of weight `w`.
    fn record(rate: f64, w: f64, t_late: f64, phase_slope: f64) -> EmissionRecord {
        let n = 80_001;
        let dur = 2.0 * t_late;
        let times: Vec<f64> = (0..n).map(|i| dur * i as f64 / (n - 1) as f64).collect();
        let pulse = |t: f64| if t < 0.0 { 0.0 } else { w * rate * (-rate * t).exp() };
        let right: Vec<f64> = times
            .iter()
            .map(|&t| if t < 0.5 * t_late { pulse(t) } else { pulse(t - t_late) })
            .collect();
        let early = integrate_until(&times, &right, 0.5 * t_late);
        let late = integrate_until(&times, &right, f64::INFINITY) - early;
        EmissionRecord {
            telecom_phase: times.iter().map(|t| phase_slope * t).collect(),
            coherent_flux: right.clone(),
            flux: [right, vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            times,
            bin_boundary: 0.5 * t_late,
            early: [early, 0.0, 0.0, 0.0],
            late: [late, 0.0, 0.0, 0.0],
            none: 1.0 - early - late,
            success_probability: early + late,
            pair_state: TwoQubitState::maximally_mixed(),
            level_populations: [0.0; 16],
            final_trace: 1.0,
            step: 0.0,
        }
    }

    #[test]
    fn identical_ideal_emitters_give_pure_psi_plus() {
        let r = record(1e9, 0.5, 40e-9, 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s = combine_records(&r, &r, 256, &mut rng).unwrap();
        assert!((s.p_success - 0.5).abs() < 1e-3, "{}", s.p_success);
        let res = summarize(&[s]);
        assert!((res.fidelity - 1.0).abs() < 1e-9, "{}", res.fidelity);
        let ideal = bell_state(BellIndex::PSI_PLUS);
        assert!((res.rho0.matrix - ideal.matrix).norm() < 1e-9);
    }

    #[test]
    fn sampled_state_matches_separable_integrals() {
        // Different lifetimes: the coherence is the product of the bin-wise
        // overlap integrals of the amplitude profiles.
        let a = record(1.0e9, 0.5, 40e-9, 0.0);
        let b = record(0.6e9, 0.45, 40e-9, 0.0);
        let exact = combine_records_exact(&a, &b);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut acc = Mat4::zeros();
        let reps = 200;
        for _ in 0..reps {
            acc += combine_records(&a, &b, 64, &mut rng).unwrap().rho;
        }
        acc /= C64::new(reps as f64, 0.0);
        for (i, j) in [(1, 1), (2, 2), (1, 2)] {
            let (x, y) = (acc[(i, j)].re, exact.rho[(i, j)].re);
            assert!((x - y).abs() < 0.01 * y, "({i},{j}) {x} vs {y}");
        }
        // Closed form for the overlap: 2 sqrt(k1 k2) / (k1 + k2) per bin.
        let ov = 2.0 * (1.0e9f64 * 0.6e9).sqrt() / 1.6e9 * (0.5f64 * 0.45).sqrt();
        assert!((exact.rho[(1, 2)].re - ov * ov).abs() < 2e-3 * ov * ov, "{} vs {}", exact.rho[(1, 2)].re, ov * ov);
    }

    #[test]
    fn mismatched_phase_drift_dephases() {
        let a = record(1e9, 0.5, 40e-9, 0.0);
        let b = record(1e9, 0.5, 40e-9, 2.0e7);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s = combine_records(&a, &b, 512, &mut rng).unwrap();
        let st = normalize_pair(&s.rho).unwrap();
        // The late bin is 40 ns behind, so the relative phase is 0.8 rad.
        let want = 0.5 * (0.8f64).cos();
        assert!((st.matrix[(1, 2)].re - want).abs() < 5e-3, "{}", st.matrix[(1, 2)]);
    }

    #[test]
    fn truncated_cooperativity_stays_in_range() {
        let c = Cooperativity { mean: 10.0, std: 2.0 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let x = sample_cooperativity(c, &mut rng);
            assert!((4.0..=16.0).contains(&x));
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = record(1e9, 0.5, 40e-9, 0.0);
        let mut b = a.clone();
        b.times[1] += 1e-15;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        assert!(combine_records(&a, &b, 4, &mut rng).is_err());
    }
}
