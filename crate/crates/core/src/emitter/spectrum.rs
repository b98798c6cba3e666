//! Dressed-state spectra of the intended and faulty manifolds, the detuning
//! scan, and the effective three-level picture of the targeted dressed state.

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Serialize};

use super::drive::DriveProfile;
use super::integrate::{evolve, InitialState};
use super::operators::{
    basis_index, hamiltonian_parts, jumps, FAULTY_TELECOM, FAULTY_VISIBLE, TELECOM, VISIBLE,
};
use super::params::{Couplings, EmitterParams};
use super::EmitterError;
use crate::qstate::C64;

/// Basis states of the intended manifold.
pub fn intended_states() -> Vec<usize> {
    vec![
        basis_index(2, 0),
        basis_index(3, 0),
        basis_index(4, TELECOM),
        basis_index(5, TELECOM | VISIBLE),
    ]
}

/// Basis states of the faulty manifold.
pub fn faulty_states() -> Vec<usize> {
    let tf = FAULTY_TELECOM;
    let both = FAULTY_TELECOM | FAULTY_VISIBLE;
    let mut v: Vec<usize> = (6..=11).map(|l| basis_index(l, 0)).collect();
    v.extend([4, 12, 13].iter().map(|&l| basis_index(l, tf)));
    v.extend([5, 14, 15, 16].iter().map(|&l| basis_index(l, both)));
    v
}

/// Jump operators (0-based positions in the `L1..L8` list) whose
/// anti-Hermitian part enters each manifold.
pub const INTENDED_JUMPS: [usize; 6] = [0, 1, 2, 3, 4, 5];
pub const FAULTY_JUMPS: [usize; 3] = [3, 6, 7];

/// Eigenvalues of `H - (i/2) Σ L†L` restricted to `states`, sorted by real
/// part.
pub fn effective_spectrum(
    params: &EmitterParams,
    g: Couplings,
    states: &[usize],
    jump_ids: &[usize],
) -> Result<Vec<C64>, EmitterError> {
    let (h0, _) = hamiltonian_parts(params, g)?;
    let js = jumps(params);
    let n = states.len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (r, &a) in states.iter().enumerate() {
        for (c, &b) in states.iter().enumerate() {
            m[(r, c)] = h0.matrix[(a, b)];
        }
    }
    for &k in jump_ids {
        for &(from, _, amp) in &js[k].map {
            if let Some(r) = states.iter().position(|&s| s == from) {
                m[(r, r)] -= C64::new(0.0, 0.5 * amp * amp);
            }
        }
    }
    eigenvalues(m)
}

pub(crate) fn eigenvalues(m: DMatrix<C64>) -> Result<Vec<C64>, EmitterError> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let schur = Schur::try_new(m, 1e-14 * scale, 10_000)
        .ok_or_else(|| EmitterError::Domain("eigenvalue iteration did not converge".into()))?;
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| EmitterError::Domain("Schur form is not triangular".into()))?;
    let mut v: Vec<C64> = ev.iter().copied().collect();
    v.sort_by(|a, b| a.re.total_cmp(&b.re));
    Ok(v)
}

/// Intended and faulty dressed-state eigenvalues at the mean couplings.
pub fn dressed_spectrum(params: &EmitterParams) -> Result<(Vec<C64>, Vec<C64>), EmitterError> {
    params.validate()?;
    dressed_spectrum_at(params, params.mean_couplings())
}

pub fn dressed_spectrum_at(
    params: &EmitterParams,
    g: Couplings,
) -> Result<(Vec<C64>, Vec<C64>), EmitterError> {
    let intended = effective_spectrum(params, g, &intended_states(), &INTENDED_JUMPS)?;
    let faulty = effective_spectrum(params, g, &faulty_states(), &FAULTY_JUMPS)?;
    Ok((intended, faulty))
}

/// Effective drive and telecom leak rate of the targeted dressed state.
pub fn effective_lambda(
    g_t: f64,
    omega2: f64,
    omega1: f64,
    kappa_t: f64,
) -> Result<(f64, f64), EmitterError> {
    for (name, v) in [("g_t", g_t), ("omega2", omega2), ("omega1", omega1), ("kappa_t", kappa_t)] {
        if !(v >= 0.0) {
            return Err(EmitterError::Domain(format!("{name} must be >= 0, got {v}")));
        }
    }
    let s = g_t * g_t + omega2 * omega2;
    if s == 0.0 {
        return Err(EmitterError::Domain(
            "g_t and omega2 cannot both be zero".into(),
        ));
    }
    let omega1_eff = omega2 * omega1 / (std::f64::consts::SQRT_2 * s.sqrt());
    let kappa_eff = g_t * g_t * kappa_t / (2.0 * s);
    Ok((omega1_eff, kappa_eff))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub delta: f64,
    /// Right-photon yield per run, averaged over the telecom and visible
    /// channels; `None` if the run failed.
    pub proportion: Option<f64>,
    /// Right photons as a fraction of all emitted photons.
    pub right_share: Option<f64>,
    pub error: Option<String>,
}

/// Right-photon yield for each first-laser detuning.
pub fn scan_detuning(
    params: &EmitterParams,
    drive: &DriveProfile,
    delta_grid: &[f64],
) -> Result<Vec<ScanPoint>, EmitterError> {
    if delta_grid.is_empty() {
        return Err(EmitterError::Config("detuning grid is empty".into()));
    }
    params.validate()?;
    let g = params.mean_couplings();
    use rayon::prelude::*;
    Ok(delta_grid
        .par_iter()
        .map(|&delta| {
            let mut p = params.clone();
            p.delta = delta;
            match evolve(&p, drive, g, &InitialState::Ground, None) {
                Ok(r) => {
                    let right = r.total(super::PhotonKind::Telecom) + r.total(super::PhotonKind::Visible);
                    let all: f64 = (0..4).map(|k| r.early[k] + r.late[k]).sum();
                    let share = if all > 0.0 { (right / all).clamp(0.0, 1.0) } else { 0.0 };
                    ScanPoint {
                        delta,
                        proportion: Some((0.5 * right).clamp(0.0, 1.0)),
                        right_share: Some(share),
                        error: None,
                    }
                }
                Err(e) => ScanPoint {
                    delta,
                    proportion: None,
                    right_share: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Indices of strict interior local maxima of a scan (failed points break
/// neighborhoods).
pub fn local_maxima(scan: &[ScanPoint]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..scan.len().saturating_sub(1) {
        if let (Some(a), Some(b), Some(c)) = (
            scan[i - 1].proportion,
            scan[i].proportion,
            scan[i + 1].proportion,
        ) {
            if b > a && b > c {
                out.push(i);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lossless() -> EmitterParams {
        let mut p = EmitterParams::default();
        p.purity = [1.0; 4];
        for v in [
            &mut p.gamma2,
            &mut p.gamma3a,
            &mut p.gamma3b,
            &mut p.gamma4,
            &mut p.kappa_t,
            &mut p.kappa_o,
        ] {
            *v = 0.0;
        }
        p
    }

    #[test]
    fn lambda_system_eigenvalues() {
        let p = lossless();
        let g = Couplings {
            g_t: 1.8e9,
            g_o: 1.0e9,
        };
        let states = [basis_index(2, 0), basis_index(3, 0), basis_index(4, TELECOM)];
        let ev = effective_spectrum(&p, g, &states, &[]).unwrap();
        let r = (g.g_t.powi(2) + p.omega2.powi(2)).sqrt();
        let want = [-r, 0.0, r];
        for (e, w) in ev.iter().zip(want) {
            assert!((e.re - w).abs() < 1e-6 * r, "{e} vs {w}");
            assert!(e.im.abs() < 1e-6 * r);
        }
    }

    #[test]
    fn uncoupled_spectrum_is_bare() {
        let mut p = EmitterParams::default();
        p.omega2 = 0.0;
        let g = Couplings { g_t: 0.0, g_o: 0.0 };
        let ev = effective_spectrum(&p, g, &intended_states(), &INTENDED_JUMPS).unwrap();
        let mut im: Vec<f64> = ev.iter().map(|e| e.im).collect();
        im.sort_by(f64::total_cmp);
        let mut want = vec![
            -0.5 * p.gamma2,
            -0.5 * (p.gamma3a + p.gamma3b),
            -0.5 * (p.gamma4 + p.kappa_t),
            -0.5 * (p.kappa_t + p.kappa_o),
        ];
        want.sort_by(f64::total_cmp);
        for (a, b) in im.iter().zip(want) {
            assert_relative_eq!(*a, b, max_relative = 1e-9);
        }
        assert!(ev.iter().all(|e| e.re.abs() < 1e-3));
    }

    #[test]
    fn eigenvalues_decay() {
        let (a, b) = dressed_spectrum(&EmitterParams::default()).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(b.len(), 13);
        assert!(a.iter().chain(b.iter()).all(|e| e.im <= 1e-6));
    }

    #[test]
    fn faulty_ground_branch_sits_near_hyperfine_splitting() {
        // With the couplings that dress the ground levels switched off, two
        // eigenvalues sit exactly at +Δ15 and the rest stay far below it.
        let p = EmitterParams::default();
        let g = Couplings {
            g_t: p.mean_couplings().g_t,
            g_o: 1e6,
        };
        let ev = effective_spectrum(&p, g, &faulty_states(), &FAULTY_JUMPS).unwrap();
        let near: Vec<&C64> = ev.iter().filter(|e| (e.re - p.delta15).abs() < 0.01 * p.delta15).collect();
        assert_eq!(near.len(), 2, "{ev:?}");
    }

    #[test]
    fn effective_lambda_cases() {
        let (o, k) = effective_lambda(2.0, 2.0, 1.0, 8.0).unwrap();
        assert_relative_eq!(o, 0.5, max_relative = 1e-12);
        assert_relative_eq!(k, 2.0, max_relative = 1e-12);
        let (o, k) = effective_lambda(0.0, 3.0, 1.0, 8.0).unwrap();
        assert_relative_eq!(o, 1.0 / 2f64.sqrt(), max_relative = 1e-12);
        assert_eq!(k, 0.0);
        let (o, k) = effective_lambda(3.0, 0.0, 1.0, 8.0).unwrap();
        assert_eq!(o, 0.0);
        assert_relative_eq!(k, 4.0, max_relative = 1e-12);
        assert!(effective_lambda(0.0, 0.0, 1.0, 1.0).is_err());
    }
}
