//! Hyperfine levels of the 87Rb cascade and their relative dipole strengths.
//!
//! Angular momenta are stored doubled (`2j`) so half-integers stay exact.

use serde::{Deserialize, Serialize};

/// Nuclear spin of 87Rb, doubled.
const TWO_I: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    S12,
    P12,
    P32,
    D32,
}

impl Manifold {
    fn two_j(self) -> i32 {
        match self {
            Manifold::S12 | Manifold::P12 => 1,
            Manifold::P32 | Manifold::D32 => 3,
        }
    }

    /// Position in the cascade; larger is higher in energy.
    fn rank(self) -> u8 {
        match self {
            Manifold::S12 => 0,
            Manifold::P12 => 1,
            Manifold::P32 => 2,
            Manifold::D32 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperfineState {
    pub manifold: Manifold,
    pub f: i32,
    pub m: i32,
}

const fn hs(manifold: Manifold, f: i32, m: i32) -> HyperfineState {
    HyperfineState { manifold, f, m }
}

/// Quantum numbers of levels `|1>` .. `|16>` (index 0 is `|1>`).
pub const LEVELS: [HyperfineState; 16] = [
    hs(Manifold::S12, 2, 2),
    hs(Manifold::P32, 3, 3),
    hs(Manifold::D32, 3, 3),
    hs(Manifold::P12, 2, 2),
    hs(Manifold::S12, 1, 1),
    hs(Manifold::P32, 3, 1),
    hs(Manifold::P32, 2, 1),
    hs(Manifold::P32, 1, 1),
    hs(Manifold::D32, 3, 1),
    hs(Manifold::D32, 2, 1),
    hs(Manifold::D32, 1, 1),
    hs(Manifold::P12, 2, 0),
    hs(Manifold::P12, 1, 0),
    hs(Manifold::S12, 1, -1),
    hs(Manifold::S12, 2, -1),
    hs(Manifold::S12, 2, 1),
];

fn fact(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn is_triangle(a: i32, b: i32, c: i32) -> bool {
    c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

/// Triangle coefficient for doubled arguments.
fn delta(a: i32, b: i32, c: i32) -> f64 {
    (fact((a + b - c) / 2) * fact((a - b + c) / 2) * fact((-a + b + c) / 2)
        / fact((a + b + c) / 2 + 1))
    .sqrt()
}

/// Wigner 3j symbol; all arguments doubled.
pub fn wigner_3j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    if m1 + m2 + m3 != 0 || !is_triangle(j1, j2, j3) {
        return 0.0;
    }
    if m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    if (j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 || (j3 + m3) % 2 != 0 {
        return 0.0;
    }
    let pre = delta(j1, j2, j3)
        * (fact((j1 + m1) / 2)
            * fact((j1 - m1) / 2)
            * fact((j2 + m2) / 2)
            * fact((j2 - m2) / 2)
            * fact((j3 + m3) / 2)
            * fact((j3 - m3) / 2))
            .sqrt();
    let kmin = 0.max((j2 - j3 - m1) / 2).max((j1 - j3 + m2) / 2);
    let kmax = ((j1 + j2 - j3) / 2).min((j1 - m1) / 2).min((j2 + m2) / 2);
    let mut sum = 0.0;
    for k in kmin..=kmax {
        let den = fact(k)
            * fact((j1 + j2 - j3) / 2 - k)
            * fact((j1 - m1) / 2 - k)
            * fact((j2 + m2) / 2 - k)
            * fact((j3 - j2 + m1) / 2 + k)
            * fact((j3 - j1 - m2) / 2 + k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / den;
    }
    let phase = if ((j1 - j2 - m3) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    phase * pre * sum
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}`; all arguments doubled.
pub fn wigner_6j(j1: i32, j2: i32, j3: i32, j4: i32, j5: i32, j6: i32) -> f64 {
    let triads = [(j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3)];
    if triads.iter().any(|&(a, b, c)| !is_triangle(a, b, c)) {
        return 0.0;
    }
    let pre: f64 = triads.iter().map(|&(a, b, c)| delta(a, b, c)).product();
    let a1 = (j1 + j2 + j3) / 2;
    let a2 = (j1 + j5 + j6) / 2;
    let a3 = (j4 + j2 + j6) / 2;
    let a4 = (j4 + j5 + j3) / 2;
    let b1 = (j1 + j2 + j4 + j5) / 2;
    let b2 = (j2 + j3 + j5 + j6) / 2;
    let b3 = (j3 + j1 + j6 + j4) / 2;
    let kmin = a1.max(a2).max(a3).max(a4);
    let kmax = b1.min(b2).min(b3);
    let mut sum = 0.0;
    for k in kmin..=kmax {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * fact(k + 1)
            / (fact(k - a1)
                * fact(k - a2)
                * fact(k - a3)
                * fact(k - a4)
                * fact(b1 - k)
                * fact(b2 - k)
                * fact(b3 - k));
    }
    pre * sum
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | J M>`; doubled arguments.
pub fn clebsch_gordan(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
    let phase = if ((j1 - j2 + m) / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * ((j + 1) as f64).sqrt() * wigner_3j(j1, j2, j, m1, m2, -m)
}

/// Hyperfine dipole factor between two levels relative to the reduced
/// fine-structure element of their line. Zero for forbidden transitions.
pub fn dipole_factor(a: HyperfineState, b: HyperfineState) -> f64 {
    let (lo, hi) = if a.manifold.rank() < b.manifold.rank() {
        (a, b)
    } else {
        (b, a)
    };
    let (jl, jh) = (lo.manifold.two_j(), hi.manifold.two_j());
    let (fl, fh) = (2 * lo.f, 2 * hi.f);
    let q = 2 * (lo.m - hi.m);
    if q.abs() > 2 {
        return 0.0;
    }
    let exp = (fh + jl + 2 + TWO_I) / 2;
    let sign = if exp % 2 == 0 { 1.0 } else { -1.0 };
    sign * (((fh + 1) * (jl + 1)) as f64).sqrt()
        * wigner_6j(jl, jh, 2, fh, fl, TWO_I)
        * clebsch_gordan(fh, 2 * hi.m, 2, q, fl, 2 * lo.m)
}

/// Coupling arrows `(to, from)` (1-based levels) driven by each field.
pub const ARROWS: [(u8, u8); 33] = [
    (2, 1),
    (6, 1),
    (7, 1),
    (8, 1),
    (3, 2),
    (9, 6),
    (10, 6),
    (11, 6),
    (9, 7),
    (10, 7),
    (11, 7),
    (9, 8),
    (10, 8),
    (11, 8),
    (4, 3),
    (4, 9),
    (4, 10),
    (4, 11),
    (12, 9),
    (12, 10),
    (12, 11),
    (13, 9),
    (13, 10),
    (13, 11),
    (5, 4),
    (5, 12),
    (5, 13),
    (14, 12),
    (14, 13),
    (15, 12),
    (15, 13),
    (16, 12),
    (16, 13),
];

/// Relative Clebsch-Gordan weights `c_{j,i}` keyed by arrow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgTable {
    pub entries: Vec<((u8, u8), f64)>,
}

impl CgTable {
    /// Table computed from angular-momentum algebra for the level assignment
    /// in [`LEVELS`].
    pub fn rubidium87() -> Self {
        let entries = ARROWS
            .iter()
            .map(|&(j, i)| {
                let c = dipole_factor(LEVELS[j as usize - 1], LEVELS[i as usize - 1]);
                ((j, i), c)
            })
            .collect();
        CgTable { entries }
    }

    pub fn get(&self, to: u8, from: u8) -> Option<f64> {
        self.entries
            .iter()
            .find(|(k, _)| *k == (to, from))
            .map(|(_, v)| *v)
    }

    pub fn insert(&mut self, to: u8, from: u8, value: f64) {
        match self.entries.iter_mut().find(|(k, _)| *k == (to, from)) {
            Some(e) => e.1 = value,
            None => self.entries.push(((to, from), value)),
        }
    }

    pub fn remove(&mut self, to: u8, from: u8) {
        self.entries.retain(|(k, _)| *k != (to, from));
    }
}

impl Default for CgTable {
    fn default() -> Self {
        Self::rubidium87()
    }
}
