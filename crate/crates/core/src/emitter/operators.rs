//! Hamiltonian and jump operators on (16 atomic levels) x (4 photon modes).

use nalgebra::DMatrix;

use super::params::{Couplings, EmitterParams};
use super::EmitterError;
use crate::qstate::C64;

pub const N_LEVELS: usize = 16;
pub const N_PHOTON: usize = 16;
pub const DIM: usize = N_LEVELS * N_PHOTON;

/// Photon-mode occupation bits.
pub const TELECOM: usize = 1;
pub const VISIBLE: usize = 2;
pub const FAULTY_TELECOM: usize = 4;
pub const FAULTY_VISIBLE: usize = 8;
pub const MODE_BITS: [usize; 4] = [TELECOM, VISIBLE, FAULTY_TELECOM, FAULTY_VISIBLE];

/// Index of `|level> ⊗ |photons>` with `level` 1-based.
pub fn basis_index(level: usize, photons: usize) -> usize {
    debug_assert!((1..=N_LEVELS).contains(&level) && photons < N_PHOTON);
    (level - 1) * N_PHOTON + photons
}

pub fn level_of(index: usize) -> usize {
    index / N_PHOTON + 1
}

pub fn photons_of(index: usize) -> usize {
    index % N_PHOTON
}

/// Dense operator over the full composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemOperator {
    pub label: String,
    pub matrix: DMatrix<C64>,
}

impl SystemOperator {
    fn zeros(label: impl Into<String>) -> Self {
        SystemOperator {
            label: label.into(),
            matrix: DMatrix::zeros(DIM, DIM),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest entry of `H - H†` relative to the largest entry of `H`.
    pub fn relative_hermiticity_error(&self) -> f64 {
        let scale = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let d = &self.matrix - self.matrix.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::new();
        for c in 0..self.matrix.ncols() {
            for r in 0..self.matrix.nrows() {
                let v = self.matrix[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    out.push((r, c, v));
                }
            }
        }
        out
    }
}

fn cg(params: &EmitterParams, to: u8, from: u8) -> Result<f64, EmitterError> {
    params.cg.get(to, from).ok_or_else(|| {
        EmitterError::Config(format!(
            "missing Clebsch-Gordan entry for arrow |{from}> -> |{to}>"
        ))
    })
}

/// Adds `w |to><from| ⊗ (a†)` and its conjugate; `create` is the photon bit
/// created on the way up (0 for a laser drive).
fn add_coupling(h: &mut DMatrix<C64>, to: usize, from: usize, create: usize, w: f64) {
    if w == 0.0 {
        return;
    }
    for n in 0..N_PHOTON {
        if n & create != 0 {
            continue;
        }
        let r = basis_index(to, n | create);
        let c = basis_index(from, n);
        h[(r, c)] += C64::new(w, 0.0);
        h[(c, r)] += C64::new(w, 0.0);
    }
}

fn add_energy(h: &mut DMatrix<C64>, level: usize, e: f64) {
    if e == 0.0 {
        return;
    }
    for n in 0..N_PHOTON {
        let i = basis_index(level, n);
        h[(i, i)] += C64::new(e, 0.0);
    }
}

/// Drive-independent part and unit-drive part of the Hamiltonian (in units
/// of h), so that `H = H0 + Ω1(t) H1`.
pub fn hamiltonian_parts(
    params: &EmitterParams,
    g: Couplings,
) -> Result<(SystemOperator, SystemOperator), EmitterError> {
    let [p1, p2, p3, p4] = params.purity;
    let (s1, f1) = (p1.sqrt(), (1.0 - p1).sqrt());
    let s2 = p2.sqrt();
    let (s3, f3) = (p3.sqrt(), (1.0 - p3).sqrt());
    let (s4, f4) = (p4.sqrt(), (1.0 - p4).sqrt());

    let mut h1 = SystemOperator::zeros("H1");
    let c21 = cg(params, 2, 1)?;
    add_coupling(&mut h1.matrix, 2, 1, 0, s1);
    for i in 6..=8u8 {
        let w = f1 * cg(params, i, 1)? / c21;
        add_coupling(&mut h1.matrix, i as usize, 1, 0, w);
    }

    let mut h0 = SystemOperator::zeros("H0");
    let m = &mut h0.matrix;
    add_energy(m, 1, params.delta);
    add_energy(m, 7, -params.delta7);
    add_energy(m, 8, -(params.delta7 + params.delta8));
    add_energy(m, 10, -params.delta10);
    add_energy(m, 11, -(params.delta10 + params.delta11));
    add_energy(m, 13, -params.delta13);
    add_energy(m, 15, params.delta15);
    add_energy(m, 16, params.delta15);

    add_coupling(m, 3, 2, 0, s2 * params.omega2);
    add_coupling(m, 4, 3, TELECOM, s3 * g.g_t);
    add_coupling(m, 5, 4, VISIBLE, s4 * g.g_o);

    let c32 = cg(params, 3, 2)?;
    for j in 9..=11u8 {
        for i in 6..=8u8 {
            let w = s2 * params.omega2 * cg(params, j, i)? / c32;
            add_coupling(m, j as usize, i as usize, 0, w);
        }
    }
    let c43 = cg(params, 4, 3)?;
    for i in 9..=11u8 {
        let w = f3 * g.g_t * cg(params, 4, i)? / c43;
        add_coupling(m, 4, i as usize, FAULTY_TELECOM, w);
        for j in [12u8, 13] {
            let w = s3 * g.g_t * cg(params, j, i)? / c43;
            add_coupling(m, j as usize, i as usize, FAULTY_TELECOM, w);
        }
    }
    let c54 = cg(params, 5, 4)?;
    for i in [12u8, 13] {
        for (j, pol) in [(5u8, f4), (14, s4), (15, s4), (16, f4)] {
            let w = pol * g.g_o * cg(params, j, i)? / c54;
            add_coupling(m, j as usize, i as usize, FAULTY_VISIBLE, w);
        }
    }
    Ok((h0, h1))
}

/// Full Hamiltonian (units of h) at drive amplitude `omega1_now`.
pub fn build_hamiltonian(
    params: &EmitterParams,
    g_t: f64,
    g_o: f64,
    omega1_now: f64,
) -> Result<SystemOperator, EmitterError> {
    if !(g_t > 0.0 && g_o > 0.0) {
        return Err(EmitterError::Domain(format!(
            "coupling samples must be > 0, got g_t = {g_t}, g_o = {g_o}"
        )));
    }
    let (h0, h1) = hamiltonian_parts(params, Couplings { g_t, g_o })?;
    Ok(SystemOperator {
        label: "H".into(),
        matrix: h0.matrix + h1.matrix * C64::new(omega1_now, 0.0),
    })
}

/// A jump operator that maps each basis state to at most one basis state.
#[derive(Debug, Clone)]
pub struct Jump {
    pub label: &'static str,
    /// `(from, to, amplitude)`
    pub map: Vec<(usize, usize, f64)>,
}

impl Jump {
    fn atomic(label: &'static str, rate: f64, to: usize, from: usize) -> Self {
        let a = rate.sqrt();
        let map = (0..N_PHOTON)
            .map(|n| (basis_index(from, n), basis_index(to, n), a))
            .collect();
        Jump { label, map }
    }

    fn cavity(label: &'static str, rate: f64, bit: usize) -> Self {
        let a = rate.sqrt();
        let mut map = Vec::new();
        for level in 1..=N_LEVELS {
            for n in 0..N_PHOTON {
                if n & bit != 0 {
                    map.push((basis_index(level, n), basis_index(level, n & !bit), a));
                }
            }
        }
        Jump { label, map }
    }

    pub fn to_operator(&self) -> SystemOperator {
        let mut op = SystemOperator::zeros(self.label);
        for &(from, to, a) in &self.map {
            op.matrix[(to, from)] += C64::new(a, 0.0);
        }
        op
    }

    pub fn target(&self, from: usize) -> Option<(usize, f64)> {
        self.map
            .iter()
            .find(|(f, _, _)| *f == from)
            .map(|&(_, t, a)| (t, a))
    }
}

/// The eight dissipators: four atomic decays then four cavity leaks.
pub fn jumps(params: &EmitterParams) -> Vec<Jump> {
    vec![
        Jump::atomic("L1", params.gamma2, 1, 2),
        Jump::atomic("L2", params.gamma3a, 2, 3),
        Jump::atomic("L3", params.gamma3b, 4, 3),
        Jump::atomic("L4", params.gamma4, 5, 4),
        Jump::cavity("L5", params.kappa_t, TELECOM),
        Jump::cavity("L6", params.kappa_o, VISIBLE),
        Jump::cavity("L7", params.kappa_t, FAULTY_TELECOM),
        Jump::cavity("L8", params.kappa_o, FAULTY_VISIBLE),
    ]
}

pub fn build_lindblads(params: &EmitterParams) -> Vec<SystemOperator> {
    jumps(params).iter().map(Jump::to_operator).collect()
}
