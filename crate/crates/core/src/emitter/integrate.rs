//! Master-equation propagation restricted to the density-matrix entries that
//! the dynamics can actually reach from the initial state.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::drive::DriveProfile;
use super::operators::{self, basis_index, hamiltonian_parts, jumps, DIM, MODE_BITS};
use super::params::{Couplings, EmitterParams};
use super::EmitterError;
use crate::qstate::{TwoQubitState, C64};

const TRACE_TOL: f64 = 1e-6;
const EIG_TOL: f64 = 1e-6;
/// Default step as a fraction of the inverse fastest rate.
pub const DEFAULT_STEP_FACTOR: f64 = 0.09;
const MAX_STEP_FACTOR: f64 = 0.1;
const POSITIVITY_CHECK_EVERY: usize = 2000;
/// The first four dissipators are spontaneous atomic decays.
const ATOMIC_JUMPS: usize = 4;

/// Photon kinds in the order used by every per-mode array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonKind {
    Telecom = 0,
    Visible = 1,
    FaultyTelecom = 2,
    FaultyVisible = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `|1> ⊗ vacuum`
    Ground,
    /// A basis state `|level> ⊗ |photons>`.
    Basis { level: usize, photons: usize },
    /// Arbitrary density matrix over the full space.
    Matrix(DMatrix<C64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub times: Vec<f64>,
    /// Emission rate into the fiber per photon kind, `κ <a†a>` (1/s).
    pub flux: [Vec<f64>; 4],
    pub bin_boundary: f64,
    /// Emitted probability per photon kind before the bin boundary.
    pub early: [f64; 4],
    /// Emitted probability per photon kind after the bin boundary.
    pub late: [f64; 4],
    /// Probability that no telecom photon left the cavity.
    pub none: f64,
    /// Right telecom photon emitted in either bin.
    pub success_probability: f64,
    /// Time-bin state of the right visible-telecom pair (visible first),
    /// assuming the two bins are fully coherent.
    pub pair_state: TwoQubitState,
    /// Atomic level populations at the end of the window, `|1>` first.
    pub level_populations: [f64; 16],
    pub final_trace: f64,
    pub step: f64,
    /// Phase of the intended telecom emission amplitude along the no-jump
    /// trajectory, on the `times` grid. Empty unless requested or for mixed
    /// initial states.
    #[serde(default)]
    pub telecom_phase: Vec<f64>,
    /// Right telecom flux of the branch without free-space scattering after
    /// the bin boundary, the part of the emission that keeps its early/late
    /// coherence.
    /// Empty unless requested.
    #[serde(default)]
    pub coherent_flux: Vec<f64>,
}

impl EmissionRecord {
    pub fn total(&self, kind: PhotonKind) -> f64 {
        self.early[kind as usize] + self.late[kind as usize]
    }

    pub fn all_telecom(&self) -> f64 {
        self.total(PhotonKind::Telecom) + self.total(PhotonKind::FaultyTelecom)
    }

    /// Index of the first grid point at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x < t)
    }

    /// Fraction of all emitted photon probability (every kind) emitted by
    /// time `t`.
    pub fn emitted_fraction_by(&self, t: f64) -> f64 {
        let total: f64 = (0..4).map(|k| self.early[k] + self.late[k]).sum();
        if total <= 0.0 {
            return 1.0;
        }
        let mut acc = 0.0;
        for k in 0..4 {
            acc += integrate_until(&self.times, &self.flux[k], t);
        }
        acc / total
    }

    /// CSV with a header row: time and the four fluxes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_s,telecom_per_s,visible_per_s,faulty_telecom_per_s,faulty_visible_per_s")?;
        for (i, t) in self.times.iter().enumerate() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e}",
                t, self.flux[0][i], self.flux[1][i], self.flux[2][i], self.flux[3][i]
            )?;
        }
        Ok(())
    }
}

/// Trapezoid integral of `y` over `x` up to `t`.
pub fn integrate_until(x: &[f64], y: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for i in 1..x.len() {
        if x[i - 1] >= t {
            break;
        }
        let hi = x[i].min(t);
        let frac = (hi - x[i - 1]) / (x[i] - x[i - 1]);
        let y_hi = y[i - 1] + frac * (y[i] - y[i - 1]);
        acc += 0.5 * (y[i - 1] + y_hi) * (hi - x[i - 1]);
    }
    acc
}

/// Compressed sparse rows over the active entries.
#[derive(Debug, Clone, Default)]
struct Csr {
    row_start: Vec<u32>,
    col: Vec<u32>,
    val: Vec<C64>,
}

impl Csr {
    fn from_coo(n: usize, mut coo: Vec<(u32, u32, C64)>) -> Self {
        coo.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_start = vec![0u32; n + 1];
        let mut col = Vec::with_capacity(coo.len());
        let mut val: Vec<C64> = Vec::with_capacity(coo.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in coo {
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_start[r as usize + 1] += 1;
            col.push(c);
            val.push(v);
        }
        for i in 0..n {
            row_start[i + 1] += row_start[i];
        }
        Csr {
            row_start,
            col,
            val,
        }
    }

    /// `out = self * y` (or `out += s * self * y` when `accumulate`).
    #[inline]
    fn apply(&self, y: &[C64], out: &mut [C64], scale: f64, accumulate: bool) {
        for (r, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_start[r] as usize, self.row_start[r + 1] as usize);
            let mut acc = C64::new(0.0, 0.0);
            for k in a..b {
                acc += self.val[k] * y[self.col[k] as usize];
            }
            if accumulate {
                *o += acc * scale;
            } else {
                *o = acc * scale;
            }
        }
    }

    fn nnz(&self) -> usize {
        self.val.len()
    }
}

/// Generator of the master equation on the reachable entries.
pub struct Liouvillian {
    pairs: Vec<(u16, u16)>,
    index: HashMap<(u16, u16), usize>,
    static_part: Csr,
    /// Repopulation by spontaneous atomic decay, kept apart so that the
    /// branch without free-space scattering can be followed.
    atomic_feed: Csr,
    drive_part: Csr,
    /// Positions of diagonal entries and their basis index.
    diagonal: Vec<(usize, usize)>,
    /// Leak rate per photon kind.
    kappa: [f64; 4],
    fastest_rate: f64,
}

impl Liouvillian {
    pub fn new(
        params: &EmitterParams,
        g: Couplings,
        seeds: &[(usize, usize)],
    ) -> Result<Self, EmitterError> {
        let (h0, h1) = hamiltonian_parts(params, g)?;
        let js = jumps(params);
        let mut damping = vec![0.0; DIM];
        for j in &js {
            for &(from, _, a) in &j.map {
                damping[from] += a * a;
            }
        }
        // Columns of A0 = iH0 - M/2 and A1 = iH1.
        let mut cols: Vec<Vec<(usize, C64, C64)>> = vec![Vec::new(); DIM];
        let i = C64::new(0.0, 1.0);
        for c in 0..DIM {
            for r in 0..DIM {
                let mut a0 = i * h0.matrix[(r, c)];
                if r == c {
                    a0 -= C64::new(0.5 * damping[c], 0.0);
                }
                let a1 = i * h1.matrix[(r, c)];
                if a0.norm() != 0.0 || a1.norm() != 0.0 {
                    cols[c].push((r, a0, a1));
                }
            }
        }
        let jump_of: Vec<Vec<(usize, f64)>> = js
            .iter()
            .map(|j| {
                let mut t = vec![(usize::MAX, 0.0); DIM];
                for &(from, to, a) in &j.map {
                    t[from] = (to, a);
                }
                t
            })
            .collect();

        // Reachable entries from the seeds.
        let mut pairs: Vec<(u16, u16)> = Vec::new();
        let mut index: HashMap<(u16, u16), usize> = HashMap::new();
        let mut queue = std::collections::VecDeque::new();
        let mut push = |p: (u16, u16), pairs: &mut Vec<(u16, u16)>, queue: &mut std::collections::VecDeque<(u16, u16)>| {
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(p) {
                e.insert(pairs.len());
                pairs.push(p);
                queue.push_back(p);
            }
        };
        for &(a, b) in seeds {
            push((a as u16, b as u16), &mut pairs, &mut queue);
        }
        while let Some((c, d)) = queue.pop_front() {
            let (c, d) = (c as usize, d as usize);
            for &(a, _, _) in &cols[c] {
                push((a as u16, d as u16), &mut pairs, &mut queue);
            }
            for &(b, _, _) in &cols[d] {
                push((c as u16, b as u16), &mut pairs, &mut queue);
            }
            for t in &jump_of {
                let (tc, _) = t[c];
                let (td, _) = t[d];
                if tc != usize::MAX && td != usize::MAX {
                    push((tc as u16, td as u16), &mut pairs, &mut queue);
                }
            }
        }

        let n = pairs.len();
        let mut coo0 = Vec::new();
        let mut coo1 = Vec::new();
        let mut coo_f = Vec::new();
        for (s, &(c, d)) in pairs.iter().enumerate() {
            let (c, d) = (c as usize, d as usize);
            for &(a, a0, a1) in &cols[c] {
                let t = index[&(a as u16, d as u16)] as u32;
                if a0.norm() != 0.0 {
                    coo0.push((t, s as u32, a0));
                }
                if a1.norm() != 0.0 {
                    coo1.push((t, s as u32, a1));
                }
            }
            for &(b, a0, a1) in &cols[d] {
                let t = index[&(c as u16, b as u16)] as u32;
                if a0.norm() != 0.0 {
                    coo0.push((t, s as u32, a0.conj()));
                }
                if a1.norm() != 0.0 {
                    coo1.push((t, s as u32, a1.conj()));
                }
            }
            for (k, tj) in jump_of.iter().enumerate() {
                let (tc, ac) = tj[c];
                let (td, ad) = tj[d];
                if tc != usize::MAX && td != usize::MAX {
                    let t = index[&(tc as u16, td as u16)] as u32;
                    let dst = if k < ATOMIC_JUMPS { &mut coo_f } else { &mut coo0 };
                    dst.push((t, s as u32, C64::new(ac * ad, 0.0)));
                }
            }
        }
        let diagonal = pairs
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| a == b)
            .map(|(k, (a, _))| (k, *a as usize))
            .collect();

        let mut fastest = [
            params.kappa_t,
            params.kappa_o,
            g.g_t,
            g.g_o,
            params.omega2,
            params.delta.abs(),
            params.gamma2,
            params.gamma3a,
            params.gamma3b,
            params.gamma4,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        // Splittings of levels that are actually populated.
        let active: Vec<usize> = pairs
            .iter()
            .filter(|(a, b)| a == b)
            .map(|(a, _)| operators::level_of(*a as usize))
            .collect();
        for (lvl, e) in [
            (7, params.delta7),
            (8, params.delta7 + params.delta8),
            (10, params.delta10),
            (11, params.delta10 + params.delta11),
            (13, params.delta13),
            (15, params.delta15),
            (16, params.delta15),
        ] {
            if active.contains(&lvl) {
                fastest = fastest.max(e.abs());
            }
        }

        Ok(Liouvillian {
            pairs,
            index,
            static_part: Csr::from_coo(n, coo0),
            atomic_feed: Csr::from_coo(n, coo_f),
            drive_part: Csr::from_coo(n, coo1),
            diagonal,
            kappa: [params.kappa_t, params.kappa_o, params.kappa_t, params.kappa_o],
            fastest_rate: fastest,
        })
    }

    pub fn n_entries(&self) -> usize {
        self.pairs.len()
    }

    pub fn nnz(&self) -> usize {
        self.static_part.nnz() + self.drive_part.nnz() + self.atomic_feed.nnz()
    }

    /// Fastest rate the step must resolve, excluding the drive.
    pub fn fastest_rate(&self) -> f64 {
        self.fastest_rate
    }

    fn derivative(&self, y: &[C64], omega1: f64, feed: bool, out: &mut [C64]) {
        self.static_part.apply(y, out, 1.0, false);
        if feed {
            self.atomic_feed.apply(y, out, 1.0, true);
        }
        if omega1 != 0.0 {
            self.drive_part.apply(y, out, omega1, true);
        }
    }

    fn fluxes(&self, y: &[C64]) -> [f64; 4] {
        let mut f = [0.0; 4];
        for &(k, b) in &self.diagonal {
            let n = operators::photons_of(b);
            let p = y[k].re;
            for (m, bit) in MODE_BITS.iter().enumerate() {
                if n & bit != 0 {
                    f[m] += p;
                }
            }
        }
        for m in 0..4 {
            f[m] *= self.kappa[m];
        }
        f
    }

    fn trace(&self, y: &[C64]) -> f64 {
        self.diagonal.iter().map(|&(k, _)| y[k].re).sum()
    }

    fn min_eigenvalue(&self, y: &[C64]) -> f64 {
        let mut states: Vec<usize> = self.diagonal.iter().map(|&(_, b)| b).collect();
        states.sort_unstable();
        let pos: HashMap<usize, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let n = states.len();
        let mut m = DMatrix::<C64>::zeros(n, n);
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            if let (Some(&i), Some(&j)) = (pos.get(&(a as usize)), pos.get(&(b as usize))) {
                m[(i, j)] = y[k];
            }
        }
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn seeds_and_vector(init: &InitialState) -> Result<Vec<((usize, usize), C64)>, EmitterError> {
    match init {
        InitialState::Ground => Ok(vec![((basis_index(1, 0), basis_index(1, 0)), C64::new(1.0, 0.0))]),
        InitialState::Basis { level, photons } => {
            if !(1..=16).contains(level) || *photons >= 16 {
                return Err(EmitterError::Config(format!(
                    "initial basis state |{level}>|{photons}> out of range"
                )));
            }
            let i = basis_index(*level, *photons);
            Ok(vec![((i, i), C64::new(1.0, 0.0))])
        }
        InitialState::Matrix(m) => {
            if m.nrows() != DIM || m.ncols() != DIM {
                return Err(EmitterError::Config(format!(
                    "initial state must be {DIM}x{DIM}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let tr = m.trace();
            let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if (tr.re - 1.0).abs() > 1e-9 || herm > 1e-9 {
                return Err(EmitterError::Config(
                    "initial state must be Hermitian with unit trace".into(),
                ));
            }
            let ev = m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
            if ev < -1e-9 {
                return Err(EmitterError::Config(format!(
                    "initial state has negative eigenvalue {ev:e}"
                )));
            }
            let mut v = Vec::new();
            for c in 0..DIM {
                for r in 0..DIM {
                    if m[(r, c)].norm() != 0.0 {
                        v.push(((r, c), m[(r, c)]));
                    }
                }
            }
            Ok(v)
        }
    }
}

struct Rk4Work {
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl Rk4Work {
    fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Rk4Work {
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    /// One classical RK4 step; returns the emitted probability per kind
    /// integrated with the same stages.
    fn step(&mut self, l: &Liouvillian, y: &mut [C64], omega: f64, feed: bool, h: f64) -> [f64; 4] {
        let n = y.len();
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        let fa = l.fluxes(y);
        l.derivative(y, omega, feed, k1);
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        let fb = l.fluxes(tmp);
        l.derivative(tmp, omega, feed, k2);
        for i in 0..n {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        let fc = l.fluxes(tmp);
        l.derivative(tmp, omega, feed, k3);
        for i in 0..n {
            tmp[i] = y[i] + k3[i] * h;
        }
        let fd = l.fluxes(tmp);
        l.derivative(tmp, omega, feed, k4);
        for i in 0..n {
            y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
        std::array::from_fn(|m| h / 6.0 * (fa[m] + 2.0 * fb[m] + 2.0 * fc[m] + fd[m]))
    }
}

/// Pure-state evolution under `iH - M/2` before any quantum jump; its
/// amplitudes carry the optical phase of the first emitted photon.
struct NoJump {
    states: Vec<usize>,
    a0: DMatrix<C64>,
    a1: DMatrix<C64>,
    probes: Vec<usize>,
}

impl NoJump {
    fn new(params: &EmitterParams, g: Couplings, start: usize) -> Result<Self, EmitterError> {
        let (h0, h1) = hamiltonian_parts(params, g)?;
        let mut damping = vec![0.0; DIM];
        for j in jumps(params) {
            for &(from, _, a) in &j.map {
                damping[from] += a * a;
            }
        }
        let mut states = vec![start];
        let mut k = 0;
        while k < states.len() {
            let c = states[k];
            for r in 0..DIM {
                let linked = h0.matrix[(r, c)].norm() != 0.0 || h1.matrix[(r, c)].norm() != 0.0;
                if linked && !states.contains(&r) {
                    states.push(r);
                }
            }
            k += 1;
        }
        let n = states.len();
        let i = C64::new(0.0, 1.0);
        let a0 = DMatrix::from_fn(n, n, |r, c| {
            let mut v = i * h0.matrix[(states[r], states[c])];
            if r == c {
                v -= C64::new(0.5 * damping[states[c]], 0.0);
            }
            v
        });
        let a1 = DMatrix::from_fn(n, n, |r, c| i * h1.matrix[(states[r], states[c])]);
        let probes = [basis_index(4, operators::TELECOM), basis_index(5, operators::TELECOM | operators::VISIBLE)]
            .iter()
            .filter_map(|b| states.iter().position(|s| s == b))
            .collect();
        Ok(NoJump {
            states,
            a0,
            a1,
            probes,
        })
    }

    fn start(&self) -> nalgebra::DVector<C64> {
        let mut v = nalgebra::DVector::zeros(self.states.len());
        v[0] = C64::new(1.0, 0.0);
        v
    }

    fn step_with(&self, a: &DMatrix<C64>, psi: &mut nalgebra::DVector<C64>, h: f64) {
        let k1 = a * &*psi;
        let k2 = a * (&*psi + &k1 * C64::new(0.5 * h, 0.0));
        let k3 = a * (&*psi + &k2 * C64::new(0.5 * h, 0.0));
        let k4 = a * (&*psi + &k3 * C64::new(h, 0.0));
        let two = C64::new(2.0, 0.0);
        *psi += (k1 + k2 * two + k3 * two + k4) * C64::new(h / 6.0, 0.0);
    }

    fn phase(&self, psi: &nalgebra::DVector<C64>) -> f64 {
        self.probes.iter().map(|&k| psi[k]).sum::<C64>().arg()
    }

}

/// Default integration step for the given rates and drive.
pub fn default_step(l: &Liouvillian, drive: &DriveProfile) -> f64 {
    DEFAULT_STEP_FACTOR / l.fastest_rate().max(drive.max_amplitude())
}

/// Integrates the master equation over the drive window.
///
/// `dt = None` picks [`DEFAULT_STEP_FACTOR`] over the fastest rate.
pub fn evolve(
    params: &EmitterParams,
    drive: &DriveProfile,
    g: Couplings,
    init: &InitialState,
    dt: Option<f64>,
) -> Result<EmissionRecord, EmitterError> {
    evolve_impl(params, drive, g, init, dt, false)
}

/// [`evolve`] that also fills `coherent_flux` and `telecom_phase`, at
/// roughly twice the cost.
pub fn evolve_coherent(
    params: &EmitterParams,
    drive: &DriveProfile,
    g: Couplings,
    init: &InitialState,
    dt: Option<f64>,
) -> Result<EmissionRecord, EmitterError> {
    evolve_impl(params, drive, g, init, dt, true)
}

fn evolve_impl(
    params: &EmitterParams,
    drive: &DriveProfile,
    g: Couplings,
    init: &InitialState,
    dt: Option<f64>,
    track_coherence: bool,
) -> Result<EmissionRecord, EmitterError> {
    drive.validate()?;
    let init_entries = seeds_and_vector(init)?;
    let seeds: Vec<(usize, usize)> = init_entries.iter().map(|(p, _)| *p).collect();
    let l = Liouvillian::new(params, g, &seeds)?;
    let fastest = l.fastest_rate().max(drive.max_amplitude());
    let dt = dt.unwrap_or(DEFAULT_STEP_FACTOR / fastest.max(f64::MIN_POSITIVE));
    if !(dt > 0.0) {
        return Err(EmitterError::Config(format!("step must be > 0, got {dt}")));
    }
    if dt * fastest >= MAX_STEP_FACTOR {
        return Err(EmitterError::Integrator(format!(
            "step {dt:e} s does not resolve the fastest rate {fastest:e}/s; use dt < {:e} s",
            MAX_STEP_FACTOR / fastest
        )));
    }

    let n = l.n_entries();
    let mut y = vec![C64::new(0.0, 0.0); n];
    for &((a, b), v) in &init_entries {
        y[l.index[&(a as u16, b as u16)]] = v;
    }

    let boundary = drive.bin_boundary();
    let mut cuts = drive.breakpoints();
    if !cuts.iter().any(|&c| (c - boundary).abs() < 1e-18) {
        cuts.push(boundary);
        cuts.sort_by(f64::total_cmp);
    }

    // Optional coherent branch: free-space scattering after the bin boundary
    // reveals that no early photon was emitted, so that weight is dropped.
    // Also the optical phase of the first telecom photon.
    let coherent = if track_coherence {
        let yc = y.clone();
        let nj = match init {
            InitialState::Ground => Some(NoJump::new(params, g, basis_index(1, 0))?),
            InitialState::Basis { level, photons } => {
                Some(NoJump::new(params, g, basis_index(*level, *photons))?)
            }
            InitialState::Matrix(_) => None,
        };
        let psi = nj.as_ref().map(NoJump::start);
        let wc = Rk4Work::new(yc.len());
        Some((yc, wc, nj, psi))
    } else {
        None
    };
    let mut telecom_phase = Vec::new();
    let mut coherent_flux = Vec::new();
    if let Some((yc, _, nj, psi)) = &coherent {
        coherent_flux.push(l.fluxes(yc)[0]);
        if let (Some(nj), Some(p)) = (nj, psi) {
            telecom_phase.push(nj.phase(p));
        }
    }
    let mut coherent = coherent;

    let mut times = vec![0.0];
    let f0 = l.fluxes(&y);
    let mut flux: [Vec<f64>; 4] = std::array::from_fn(|k| vec![f0[k]]);
    // Emitted probability per kind, integrated with the same RK4 stages.
    let mut emitted = [0.0f64; 4];
    let mut early = [0.0f64; 4];

    let mut work = Rk4Work::new(n);
    let mut steps_done = 0usize;

    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let len = t1 - t0;
        if len <= 0.0 {
            continue;
        }
        let omega = drive.amplitude_at(0.5 * (t0 + t1));
        let steps = (len / dt).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        let a = coherent
            .as_ref()
            .and_then(|c| c.2.as_ref())
            .map(|nj| &nj.a0 + &nj.a1 * C64::new(omega, 0.0));
        for s in 0..steps {
            let de = work.step(&l, &mut y, omega, true, h);
            for m in 0..4 {
                emitted[m] += de[m];
            }
            let t = t0 + (s + 1) as f64 * h;
            let f = l.fluxes(&y);
            times.push(t);
            for m in 0..4 {
                flux[m].push(f[m].max(0.0));
            }
            if let Some((yc, wc, nj, psi)) = coherent.as_mut() {
                wc.step(&l, yc, omega, t0 < boundary, h);
                coherent_flux.push(l.fluxes(yc)[0].max(0.0));
                if let (Some(nj), Some(p), Some(a)) = (nj.as_ref(), psi.as_mut(), &a) {
                    nj.step_with(a, p, h);
                    telecom_phase.push(nj.phase(p));
                }
            }
            steps_done += 1;
            let tr = l.trace(&y);
            if (tr - 1.0).abs() > TRACE_TOL || !tr.is_finite() {
                return Err(EmitterError::Integrator(format!(
                    "trace drifted to {tr} at t = {t:e} s; reduce dt below {dt:e} s"
                )));
            }
            if steps_done % POSITIVITY_CHECK_EVERY == 0 {
                check_positive(&l, &y, t, dt)?;
            }
        }
        if (t1 - boundary).abs() < 1e-18 {
            early = emitted;
        }
    }
    check_positive(&l, &y, drive.duration, dt)?;

    let late: [f64; 4] = std::array::from_fn(|m| emitted[m] - early[m]);
    let final_trace = l.trace(&y);
    let mut level_populations = [0.0; 16];
    for &(k, b) in &l.diagonal {
        level_populations[operators::level_of(b) - 1] += y[k].re;
    }
    let pe = early[0];
    let pl = late[0];
    let success = pe + pl;
    let pair_state = time_bin_pair(pe, pl);
    Ok(EmissionRecord {
        times,
        flux,
        bin_boundary: boundary,
        early,
        late,
        none: final_trace - (emitted[0] + emitted[2]),
        success_probability: success,
        pair_state,
        level_populations,
        final_trace,
        step: dt,
        telecom_phase,
        coherent_flux,
    })
}

fn check_positive(l: &Liouvillian, y: &[C64], t: f64, dt: f64) -> Result<(), EmitterError> {
    let ev = l.min_eigenvalue(y);
    if ev < -EIG_TOL {
        return Err(EmitterError::Integrator(format!(
            "negative eigenvalue {ev:e} at t = {t:e} s; reduce dt below {dt:e} s"
        )));
    }
    Ok(())
}

/// `sqrt(pE)|EE> + sqrt(pL)|LL>` normalized, as a density matrix.
fn time_bin_pair(pe: f64, pl: f64) -> TwoQubitState {
    let s = pe.max(0.0) + pl.max(0.0);
    let mut m = crate::qstate::Mat4::zeros();
    if s > 0.0 {
        let (a, b) = (pe.max(0.0) / s, pl.max(0.0) / s);
        m[(0, 0)] = C64::new(a, 0.0);
        m[(3, 3)] = C64::new(b, 0.0);
        m[(0, 3)] = C64::new((a * b).sqrt(), 0.0);
        m[(3, 0)] = m[(0, 3)];
    } else {
        m[(0, 0)] = C64::new(1.0, 0.0);
    }
    TwoQubitState::from_raw(m, crate::qstate::PauliFrame::IDENTITY)
}
