//! Pause calibration and the search for coupling-insensitive detunings.

use log::warn;
use serde::{Deserialize, Serialize};

use super::drive::{DriveProfile, DriveTemplate};
use super::integrate::{evolve, EmissionRecord, InitialState, PhotonKind};
use super::params::{Couplings, EmitterParams};
use super::spectrum::{effective_spectrum, intended_states, INTENDED_JUMPS};
use super::EmitterError;

/// Target accuracy of the early/late balance.
pub const BALANCE_TOL: f64 = 1e-4;
const MAX_ITER: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub template: DriveTemplate,
    pub profile: DriveProfile,
    /// Right telecom emission probability in each bin at the mean couplings.
    pub early: f64,
    pub late: f64,
    pub iterations: usize,
}

fn run(params: &EmitterParams, t: &DriveTemplate, g: Couplings) -> Result<EmissionRecord, EmitterError> {
    evolve(params, &t.profile()?, g, &InitialState::Ground, None)
}

fn balance(params: &EmitterParams, t: &DriveTemplate, g: Couplings) -> Result<(f64, f64), EmitterError> {
    let r = run(params, t, g)?;
    Ok((
        r.early[PhotonKind::Telecom as usize],
        r.late[PhotonKind::Telecom as usize],
    ))
}

/// Adjusts the pause start so that early and late right-telecom emission
/// are equal at the mean couplings.
pub fn calibrate_pause(
    params: &EmitterParams,
    template: &DriveTemplate,
) -> Result<Calibration, EmitterError> {
    calibrate_pause_at(params, template, params.mean_couplings())
}

pub fn calibrate_pause_at(
    params: &EmitterParams,
    template: &DriveTemplate,
    g: Couplings,
) -> Result<Calibration, EmitterError> {
    params.validate()?;
    let hi_limit = template.max_pause_start();
    if !(hi_limit > 0.0) {
        return Err(EmitterError::Config(
            "drive template leaves no room for an early pulse".into(),
        ));
    }
    let f = |ts: f64| -> Result<(f64, f64, f64), EmitterError> {
        let (e, l) = balance(params, &template.with_pause_start(ts), g)?;
        Ok((e - l, e, l))
    };
    let mut a = 1e-3 * hi_limit;
    let mut b = hi_limit;
    let (mut fa, ..) = f(a)?;
    let (mut fb, ..) = f(b)?;
    let mut iterations = 2;
    if fa > 0.0 || fb < 0.0 {
        let x = if fa.abs() < fb.abs() { a } else { b };
        let (_, e, l) = f(x)?;
        return Err(EmitterError::Calibration(format!(
            "early/late split cannot be equalized in [{a:e}, {b:e}] s; best pause start {x:e} s gives early {e:.4}, late {l:.4}"
        )));
    }
    // Illinois variant of regula falsi.
    let mut side = 0i8;
    let mut best = (a, fa);
    for _ in 0..MAX_ITER {
        let c = (a * fb - b * fa) / (fb - fa);
        let (fc, e, l) = f(c)?;
        iterations += 1;
        if fc.abs() < best.1.abs() {
            best = (c, fc);
        }
        if fc.abs() < BALANCE_TOL {
            let t = template.with_pause_start(c);
            return Ok(Calibration {
                template: t,
                profile: t.profile()?,
                early: e,
                late: l,
                iterations,
            });
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    // Accept the best point if it still meets the published balance.
    let (_, e, l) = f(best.0)?;
    if (e - l).abs() < 0.005 {
        let t = template.with_pause_start(best.0);
        return Ok(Calibration {
            template: t,
            profile: t.profile()?,
            early: e,
            late: l,
            iterations,
        });
    }
    Err(EmitterError::Calibration(format!(
        "after {iterations} evaluations the best pause start {:e} s gives early {e:.4}, late {l:.4}",
        best.0
    )))
}

/// Early-bin right telecom probability with `g_t` at the mean and at
/// `mean ± std` of the telecom cooperativity, for a given drive.
pub fn early_probabilities(
    params: &EmitterParams,
    drive: &DriveProfile,
) -> Result<[f64; 3], EmitterError> {
    let mut out = [0.0; 3];
    for (k, shift) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
        let r = evolve(params, drive, params.shifted_couplings(shift), &InitialState::Ground, None)?;
        out[k] = r.early[PhotonKind::Telecom as usize];
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadPoint {
    pub delta: f64,
    pub pause_start: f64,
    /// Early probabilities at `g_t` for `C_t = mean - std, mean, mean + std`.
    pub early: [f64; 3],
    pub spread: f64,
}

/// Calibrates the pause at `delta` and measures the early-bin spread.
pub fn spread_at(
    params: &EmitterParams,
    template: &DriveTemplate,
    delta: f64,
) -> Result<SpreadPoint, EmitterError> {
    let mut p = params.clone();
    p.delta = delta;
    let cal = calibrate_pause(&p, template)?;
    let early = early_probabilities(&p, &cal.profile)?;
    let hi = early.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = early.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SpreadPoint {
        delta,
        pause_start: cal.template.pause_start,
        early,
        spread: hi - lo,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweetSpot {
    pub delta_star: f64,
    pub spread_star: f64,
    /// Real part of the targeted intended dressed state inside the window.
    pub resonance: f64,
    pub spread_resonance: f64,
    /// True when the minimum sits on the window edge.
    pub at_boundary: bool,
    pub scan: Vec<SpreadPoint>,
}

/// Real part of the narrowest intended dressed state inside `window`.
pub fn targeted_resonance(params: &EmitterParams, window: (f64, f64)) -> Result<f64, EmitterError> {
    let ev = effective_spectrum(params, params.mean_couplings(), &intended_states(), &INTENDED_JUMPS)?;
    ev.iter()
        .filter(|e| e.re >= window.0 && e.re <= window.1)
        .min_by(|a, b| a.im.abs().total_cmp(&b.im.abs()))
        .map(|e| e.re)
        .ok_or_else(|| {
            EmitterError::Domain(format!(
                "no intended dressed state in [{:e}, {:e}] Hz",
                window.0, window.1
            ))
        })
}

/// Detunings whose pause cannot be balanced count as infinitely unstable.
fn spread_or_skip(
    params: &EmitterParams,
    template: &DriveTemplate,
    delta: f64,
) -> Result<SpreadPoint, EmitterError> {
    match spread_at(params, template, delta) {
        Err(EmitterError::Calibration(msg)) => {
            warn!("skipping detuning {delta:e} Hz: {msg}");
            Ok(SpreadPoint {
                delta,
                pause_start: f64::NAN,
                early: [f64::NAN; 3],
                spread: f64::INFINITY,
            })
        }
        r => r,
    }
}

/// Detuning in `window` that minimizes the early-bin spread over the
/// telecom-coupling fluctuation. Coarse grid of `n_grid` points followed by
/// golden-section refinement around the best grid point.
pub fn find_sweet_spot(
    params: &EmitterParams,
    template: &DriveTemplate,
    window: (f64, f64),
    n_grid: usize,
) -> Result<SweetSpot, EmitterError> {
    if !(window.1 > window.0) || n_grid < 3 {
        return Err(EmitterError::Config(
            "sweet-spot window must be increasing with at least 3 grid points".into(),
        ));
    }
    let resonance = targeted_resonance(params, window)?;
    use rayon::prelude::*;
    let step = (window.1 - window.0) / (n_grid - 1) as f64;
    let grid: Vec<f64> = (0..n_grid).map(|i| window.0 + step * i as f64).collect();
    let mut scan: Vec<SpreadPoint> = grid
        .par_iter()
        .map(|&d| spread_or_skip(params, template, d))
        .collect::<Result<_, _>>()?;
    if scan.iter().all(|p| p.spread.is_infinite()) {
        return Err(EmitterError::Calibration(
            "no detuning in the sweet-spot window could be calibrated".into(),
        ));
    }
    let (imin, _) = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.spread.total_cmp(&b.1.spread))
        .expect("non-empty grid");
    let at_boundary = imin == 0 || imin == n_grid - 1;
    let mut best = scan[imin].clone();
    if at_boundary {
        warn!(
            "sweet-spot search hit the window edge at {:e} Hz",
            best.delta
        );
    } else {
        // Golden-section search on the bracketing interval.
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (grid[imin - 1], grid[imin + 1]);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut pc = spread_or_skip(params, template, c)?;
        let mut pd = spread_or_skip(params, template, d)?;
        for _ in 0..8 {
            if pc.spread < pd.spread {
                b = d;
                d = c;
                pd = pc;
                c = b - phi * (b - a);
                pc = spread_or_skip(params, template, c)?;
            } else {
                a = c;
                c = d;
                pc = pd;
                d = a + phi * (b - a);
                pd = spread_or_skip(params, template, d)?;
            }
        }
        for p in [pc, pd] {
            if p.spread < best.spread {
                best = p.clone();
            }
            scan.push(p);
        }
    }
    let at_res = spread_at(params, template, resonance)?;
    scan.retain(|p| p.spread.is_finite());
    scan.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    Ok(SweetSpot {
        delta_star: best.delta,
        spread_star: best.spread,
        resonance,
        spread_resonance: at_res.spread,
        at_boundary,
        scan,
    })
}

/// Central-difference slope of the calibrated early-bin probability with
/// respect to `g_t` at detuning `delta`.
pub fn early_slope(
    params: &EmitterParams,
    template: &DriveTemplate,
    delta: f64,
    rel_step: f64,
) -> Result<f64, EmitterError> {
    let mut p = params.clone();
    p.delta = delta;
    let cal = calibrate_pause(&p, template)?;
    let g = p.mean_couplings();
    let h = rel_step * g.g_t;
    let at = |gt: f64| -> Result<f64, EmitterError> {
        let r = evolve(&p, &cal.profile, Couplings { g_t: gt, g_o: g.g_o }, &InitialState::Ground, None)?;
        Ok(r.early[PhotonKind::Telecom as usize])
    };
    Ok((at(g.g_t + h)? - at(g.g_t - h)?) / (2.0 * h))
}
