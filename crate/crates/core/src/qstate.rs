//! Two-qubit density-matrix algebra for time-bin entangled pairs.
//!
//! Basis order is `|EE>, |EL>, |LE>, |LL>` with the early time bin mapped to
//! logical 0 and the first qubit being the most significant bit.

use nalgebra::{Matrix2, Matrix4, SMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use nalgebra::Complex;
/// Double precision complex number.
pub type C64 = Complex<f64>;

/// 4x4 complex matrix over the two-qubit space.
pub type Mat4 = Matrix4<C64>;
type Mat16 = SMatrix<C64, 16, 16>;

const HERM_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QStateError {
    #[error("Bell index {0} is out of range 0..=3")]
    BellIndex(u8),
    #[error("state is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("state trace is {0}, expected 1")]
    Trace(f64),
    #[error("state has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("swap outcome {0:?} has zero probability")]
    ImpossibleBranch(BellIndex),
    #[error("{name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("{0}")]
    Domain(String),
}

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Pauli {
    #[default]
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix2<C64> {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => Matrix2::new(l, o, o, l),
            Pauli::X => Matrix2::new(o, l, l, o),
            Pauli::Y => Matrix2::new(o, -i, i, o),
            Pauli::Z => Matrix2::new(l, o, o, -l),
        }
    }

    /// Product up to a global phase.
    pub fn compose(self, other: Pauli) -> Pauli {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => p,
            (a, b) if a == b => I,
            (X, Y) | (Y, X) => Z,
            (X, Z) | (Z, X) => Y,
            (Y, Z) | (Z, Y) => X,
            _ => unreachable!(),
        }
    }
}

/// Deferred single-qubit corrections `(first, second)`.
///
/// The logical state is `(P1 ⊗ P2) ρ (P1 ⊗ P2)†` where `ρ` is the stored
/// physical matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct PauliFrame(pub Pauli, pub Pauli);

impl PauliFrame {
    pub const IDENTITY: PauliFrame = PauliFrame(Pauli::I, Pauli::I);

    pub fn matrix(self) -> Mat4 {
        kron2(&self.0.matrix(), &self.1.matrix())
    }

    pub fn is_identity(self) -> bool {
        self == Self::IDENTITY
    }
}

/// One of the four Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellIndex(u8);

impl BellIndex {
    pub const PHI_PLUS: BellIndex = BellIndex(0);
    pub const PHI_MINUS: BellIndex = BellIndex(1);
    pub const PSI_PLUS: BellIndex = BellIndex(2);
    pub const PSI_MINUS: BellIndex = BellIndex(3);
    pub const ALL: [BellIndex; 4] = [
        Self::PHI_PLUS,
        Self::PHI_MINUS,
        Self::PSI_PLUS,
        Self::PSI_MINUS,
    ];

    pub fn new(index: u8) -> Result<Self, QStateError> {
        if index < 4 {
            Ok(BellIndex(index))
        } else {
            Err(QStateError::BellIndex(index))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Normalized amplitudes in the computational basis.
    pub fn amplitudes(self) -> [C64; 4] {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        match self.0 {
            0 => [h, z, z, h],
            1 => [h, z, z, -h],
            2 => [z, h, h, z],
            _ => [z, h, -h, z],
        }
    }

    /// Eigenvalue of `Z ⊗ Z` on this state.
    pub fn zz_sign(self) -> f64 {
        if self.0 < 2 {
            1.0
        } else {
            -1.0
        }
    }

    /// Eigenvalue of `X ⊗ X` on this state.
    pub fn xx_sign(self) -> f64 {
        if self.0 % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Density matrix of an entangled pair together with its Pauli frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitState {
    #[serde(with = "mat4_serde")]
    pub matrix: Mat4,
    pub pauli_frame: PauliFrame,
}

impl TwoQubitState {
    /// Wraps a matrix after checking Hermiticity, trace and positivity.
    pub fn new(matrix: Mat4) -> Result<Self, QStateError> {
        let s = TwoQubitState {
            matrix,
            pauli_frame: PauliFrame::IDENTITY,
        };
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn from_raw(matrix: Mat4, pauli_frame: PauliFrame) -> Self {
        TwoQubitState {
            matrix,
            pauli_frame,
        }
    }

    pub fn from_real(rows: [[f64; 4]; 4]) -> Result<Self, QStateError> {
        Self::new(Mat4::from_fn(|r, c| C64::new(rows[r][c], 0.0)))
    }

    pub fn maximally_mixed() -> Self {
        Self::from_raw(Mat4::identity() * C64::new(0.25, 0.0), PauliFrame::IDENTITY)
    }

    /// The pair state produced by the dual-cavity emitter pair after the
    /// midpoint measurement, as tabulated for the reference parameter set.
    pub fn reference_pair() -> Self {
        Self::from_real([
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.48, 0.0],
            [0.0, 0.48, 0.5, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ])
        .expect("reference pair is a valid state")
    }

    /// Werner state `w |b><b| + (1 - w) I/4`.
    pub fn werner(target: BellIndex, weight: f64) -> Self {
        let b = bell_state(target).matrix;
        let m = b * C64::new(weight, 0.0) + Mat4::identity() * C64::new((1.0 - weight) / 4.0, 0.0);
        Self::from_raw(m, PauliFrame::IDENTITY)
    }

    pub fn with_frame(mut self, frame: PauliFrame) -> Self {
        self.pauli_frame = frame;
        self
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.matrix - self.matrix.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<(), QStateError> {
        let herm = self.hermiticity_error();
        if herm > HERM_TOL {
            return Err(QStateError::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QStateError::Trace(tr.re));
        }
        let ev = self.min_eigenvalue();
        if ev < -EIG_TOL {
            return Err(QStateError::NotPositive(ev));
        }
        Ok(())
    }

    /// Applies the recorded frame to the matrix and resets it.
    pub fn folded(&self) -> TwoQubitState {
        if self.pauli_frame.is_identity() {
            return self.clone();
        }
        let p = self.pauli_frame.matrix();
        TwoQubitState::from_raw(p * self.matrix * p.adjoint(), PauliFrame::IDENTITY)
    }

    /// Row-major `(re, im)` pairs of the folded matrix.
    pub fn to_pairs(&self) -> Vec<(f64, f64)> {
        let f = self.folded();
        let mut out = Vec::with_capacity(16);
        for r in 0..4 {
            for c in 0..4 {
                let z = f.matrix[(r, c)];
                out.push((z.re, z.im));
            }
        }
        out
    }
}

mod mat4_serde {
    use super::{Mat4, C64};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat4, s: S) -> Result<S::Ok, S::Error> {
        let mut v = Vec::with_capacity(16);
        for r in 0..4 {
            for c in 0..4 {
                v.push((m[(r, c)].re, m[(r, c)].im));
            }
        }
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat4, D::Error> {
        let v: Vec<(f64, f64)> = Vec::deserialize(d)?;
        if v.len() != 16 {
            return Err(serde::de::Error::invalid_length(v.len(), &"16 entries"));
        }
        Ok(Mat4::from_fn(|r, c| {
            let (re, im) = v[r * 4 + c];
            C64::new(re, im)
        }))
    }
}

pub(crate) fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Mat4 {
    Mat4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

pub fn bell_state(index: BellIndex) -> TwoQubitState {
    let a = index.amplitudes();
    TwoQubitState::from_raw(
        Mat4::from_fn(|r, c| a[r] * a[c].conj()),
        PauliFrame::IDENTITY,
    )
}

/// `<b| ρ |b>` of the frame-folded state.
pub fn fidelity(rho: &TwoQubitState, target: BellIndex) -> f64 {
    let f = rho.folded();
    let a = target.amplitudes();
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..4 {
        for c in 0..4 {
            acc += a[r].conj() * f.matrix[(r, c)] * a[c];
        }
    }
    acc.re.clamp(0.0, 1.0)
}

/// Depolarizing weight `exp(-duration / coherence_time)`.
pub fn depolarizing_weight(duration: f64, coherence_time: f64) -> Result<f64, QStateError> {
    if !(duration >= 0.0) {
        return Err(QStateError::Domain(format!(
            "duration must be >= 0, got {duration}"
        )));
    }
    if !(coherence_time > 0.0) {
        return Err(QStateError::Domain(format!(
            "coherence time must be > 0, got {coherence_time}"
        )));
    }
    Ok((-duration / coherence_time).exp())
}

fn mix_with_identity(rho: &TwoQubitState, keep: f64) -> TwoQubitState {
    let m = rho.matrix * C64::new(keep, 0.0)
        + Mat4::identity() * C64::new((1.0 - keep) / 4.0, 0.0);
    TwoQubitState::from_raw(m, rho.pauli_frame)
}

/// Memoryless depolarization toward `I/4` over `duration`.
pub fn depolarize(
    rho: &TwoQubitState,
    duration: f64,
    coherence_time: f64,
) -> Result<TwoQubitState, QStateError> {
    let w = depolarizing_weight(duration, coherence_time)?;
    Ok(mix_with_identity(rho, w))
}

/// With probability `epsilon` the swapped state is replaced by `I/4`.
pub fn apply_swap_error(rho: &TwoQubitState, epsilon: f64) -> Result<TwoQubitState, QStateError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(QStateError::Probability {
            name: "epsilon",
            value: epsilon,
        });
    }
    Ok(mix_with_identity(rho, 1.0 - epsilon))
}

/// Unnormalized post-measurement state on the outer qubits and its weight.
///
/// Qubit order of the product is `(left.0, left.1, right.0, right.1)`; the
/// inner pair `(left.1, right.0)` is projected onto `outcome`.
fn project_inner(left: &Mat4, right: &Mat4, outcome: BellIndex) -> (Mat4, f64) {
    let beta = outcome.amplitudes();
    let mut out = Mat4::zeros();
    // out[(a,d),(a',d')] = sum <β|bc> L[(a,b),(a',b')] R[(c,d),(c',d')] <b'c'|β>
    for a in 0..2 {
        for d in 0..2 {
            for ap in 0..2 {
                for dp in 0..2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..2 {
                        for c in 0..2 {
                            let bra = beta[b * 2 + c].conj();
                            if bra.norm_sqr() == 0.0 {
                                continue;
                            }
                            for bp in 0..2 {
                                for cp in 0..2 {
                                    let ket = beta[bp * 2 + cp];
                                    if ket.norm_sqr() == 0.0 {
                                        continue;
                                    }
                                    acc += bra
                                        * left[(a * 2 + b, ap * 2 + bp)]
                                        * right[(c * 2 + d, cp * 2 + dp)]
                                        * ket;
                                }
                            }
                        }
                    }
                    out[(a * 2 + d, ap * 2 + dp)] = acc;
                }
            }
        }
    }
    let p = out.trace().re;
    (out, p)
}

/// Probabilities of the four Bell outcomes on the inner qubits.
pub fn swap_outcome_probabilities(left: &TwoQubitState, right: &TwoQubitState) -> [f64; 4] {
    let mut p = [0.0; 4];
    for (k, b) in BellIndex::ALL.iter().enumerate() {
        p[k] = project_inner(&left.matrix, &right.matrix, *b).1.max(0.0);
    }
    p
}

/// Pauli `Q` with `(I ⊗ Q) |state> ∝ |Ψ+>` for a pure Bell matrix.
fn correction_to_psi_plus(pure_bell: &Mat4) -> Pauli {
    let target = bell_state(BellIndex::PSI_PLUS).matrix;
    let mut best = (Pauli::I, -1.0);
    for q in Pauli::ALL {
        let u = kron2(&Pauli::I.matrix(), &q.matrix());
        let m = u * pure_bell * u.adjoint();
        let f = (target * m).trace().re;
        if f > best.1 {
            best = (q, f);
        }
    }
    best.0
}

/// Heralded correction for a swap, derived by pushing ideal `|Ψ+>` inputs
/// (carrying the given frames) through the same projection.
pub fn swap_frame(left: PauliFrame, right: PauliFrame, outcome: BellIndex) -> PauliFrame {
    let ideal = bell_state(BellIndex::PSI_PLUS).matrix;
    let lp = left.matrix();
    let rp = right.matrix();
    // physical = F† logical F
    let l = lp.adjoint() * ideal * lp;
    let r = rp.adjoint() * ideal * rp;
    let (m, p) = project_inner(&l, &r, outcome);
    let m = m / C64::new(p, 0.0);
    PauliFrame(Pauli::I, correction_to_psi_plus(&m))
}

/// Bell measurement on the two inner qubits of `left ⊗ right`.
///
/// Returns the renormalized outer-qubit state with its composed frame and
/// the probability of `outcome`.
pub fn entanglement_swap(
    left: &TwoQubitState,
    right: &TwoQubitState,
    outcome: BellIndex,
) -> Result<(TwoQubitState, f64), QStateError> {
    let (m, p) = project_inner(&left.matrix, &right.matrix, outcome);
    if p <= 1e-15 {
        return Err(QStateError::ImpossibleBranch(outcome));
    }
    let mut m = m / C64::new(p, 0.0);
    m = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let frame = swap_frame(left.pauli_frame, right.pauli_frame, outcome);
    Ok((TwoQubitState::from_raw(m, frame), p))
}

/// Z- and X-basis error rates relative to `target`, after folding the frame.
pub fn qber(rho: &TwoQubitState, target: BellIndex) -> (f64, f64) {
    let f = rho.folded();
    let m = &f.matrix;
    let zz = m[(0, 0)].re - m[(1, 1)].re - m[(2, 2)].re + m[(3, 3)].re;
    // <XX> = 2 Re(ρ_03 + ρ_12)
    let xx = 2.0 * (m[(0, 3)].re + m[(1, 2)].re);
    let qz = ((1.0 - target.zz_sign() * zz) / 2.0).clamp(0.0, 1.0);
    let qx = ((1.0 - target.xx_sign() * xx) / 2.0).clamp(0.0, 1.0);
    (qz, qx)
}

/// Brute-force swap through the explicit 16x16 product space; kept for
/// cross-checking [`entanglement_swap`].
#[doc(hidden)]
pub fn swap_by_kronecker(left: &Mat4, right: &Mat4, outcome: BellIndex) -> (Mat4, f64) {
    let full = Mat16::from_fn(|r, c| left[(r / 4, c / 4)] * right[(r % 4, c % 4)]);
    let beta = outcome.amplitudes();
    // Projector I ⊗ |β><β| ⊗ I on qubits (1,2) of 0..4.
    let mut proj = Mat16::zeros();
    for a in 0..2 {
        for d in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for bp in 0..2 {
                        for cp in 0..2 {
                            let r = a * 8 + b * 4 + c * 2 + d;
                            let col = a * 8 + bp * 4 + cp * 2 + d;
                            proj[(r, col)] += beta[b * 2 + c] * beta[bp * 2 + cp].conj();
                        }
                    }
                }
            }
        }
    }
    let post = proj * full * proj;
    let mut out = Mat4::zeros();
    for a in 0..2 {
        for d in 0..2 {
            for ap in 0..2 {
                for dp in 0..2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..2 {
                        for c in 0..2 {
                            acc += post[(a * 8 + b * 4 + c * 2 + d, ap * 8 + b * 4 + c * 2 + dp)];
                        }
                    }
                    out[(a * 2 + d, ap * 2 + dp)] = acc;
                }
            }
        }
    }
    let p = out.trace().re;
    (out, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_diff(a: &Mat4, b: &Mat4) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn psi_plus_has_expected_entries() {
        let m = bell_state(BellIndex::PSI_PLUS).matrix;
        for (r, c) in [(1, 1), (2, 2), (1, 2), (2, 1)] {
            assert_abs_diff_eq!(m[(r, c)].re, 0.5, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(m[(0, 0)].re, 0.0);
        assert_abs_diff_eq!(m[(3, 3)].re, 0.0);
    }

    #[test]
    fn phi_plus_corners() {
        let m = bell_state(BellIndex::PHI_PLUS).matrix;
        for (r, c) in [(0, 0), (3, 3), (0, 3), (3, 0)] {
            assert_abs_diff_eq!(m[(r, c)].re, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn fidelity_cases() {
        let pp = bell_state(BellIndex::PSI_PLUS);
        assert_abs_diff_eq!(fidelity(&pp, BellIndex::PSI_MINUS), 0.0, epsilon = 1e-15);
        for b in BellIndex::ALL {
            assert_abs_diff_eq!(fidelity(&bell_state(b), b), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(
                fidelity(&TwoQubitState::maximally_mixed(), b),
                0.25,
                epsilon = 1e-15
            );
        }
        let rho0 = TwoQubitState::reference_pair();
        assert_abs_diff_eq!(fidelity(&rho0, BellIndex::PSI_PLUS), 0.98, epsilon = 1e-12);
    }

    #[test]
    fn bell_index_rejects_out_of_range() {
        assert!(BellIndex::new(4).is_err());
        assert_eq!(BellIndex::new(3).unwrap(), BellIndex::PSI_MINUS);
    }

    #[test]
    fn depolarize_limits() {
        let rho = TwoQubitState::reference_pair();
        let same = depolarize(&rho, 0.0, 1.0).unwrap();
        assert!(max_diff(&same.matrix, &rho.matrix) < 1e-15);
        let gone = depolarize(&rho, 1e6, 1.0).unwrap();
        assert!(max_diff(&gone.matrix, &TwoQubitState::maximally_mixed().matrix) < 1e-15);
        assert!(depolarize(&rho, -1.0, 1.0).is_err());
        assert!(depolarize(&rho, 1.0, 0.0).is_err());
    }

    #[test]
    fn swap_error_cases() {
        let pp = bell_state(BellIndex::PSI_PLUS);
        let s = apply_swap_error(&pp, 0.0).unwrap();
        assert!(max_diff(&s.matrix, &pp.matrix) < 1e-15);
        let s = apply_swap_error(&pp, 1.0).unwrap();
        assert!(max_diff(&s.matrix, &TwoQubitState::maximally_mixed().matrix) < 1e-15);
        let s = apply_swap_error(&pp, 1e-2).unwrap();
        assert_abs_diff_eq!(fidelity(&s, BellIndex::PSI_PLUS), 0.9925, epsilon = 1e-12);
        assert!(apply_swap_error(&pp, 1.5).is_err());
    }

    #[test]
    fn ideal_swap_gives_bell_state_after_frame() {
        let pp = bell_state(BellIndex::PSI_PLUS);
        for b in BellIndex::ALL {
            let (out, p) = entanglement_swap(&pp, &pp, b).unwrap();
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
            assert_abs_diff_eq!(fidelity(&out, BellIndex::PSI_PLUS), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn swap_with_mixed_is_mixed() {
        let rho = TwoQubitState::reference_pair();
        let mm = TwoQubitState::maximally_mixed();
        for b in BellIndex::ALL {
            let (out, _) = entanglement_swap(&rho, &mm, b).unwrap();
            assert!(max_diff(&out.matrix, &mm.matrix) < 1e-12);
        }
    }

    #[test]
    fn impossible_branch_is_reported() {
        // |EE> ⊗ |EE>: inner qubits are |EE>, orthogonal to Ψ±.
        let mut m = Mat4::zeros();
        m[(0, 0)] = C64::new(1.0, 0.0);
        let s = TwoQubitState::new(m).unwrap();
        assert!(matches!(
            entanglement_swap(&s, &s, BellIndex::PSI_PLUS),
            Err(QStateError::ImpossibleBranch(_))
        ));
    }

    #[test]
    fn qber_cases() {
        for b in BellIndex::ALL {
            let (qz, qx) = qber(&bell_state(b), b);
            assert_eq!((qz, qx), (0.0, 0.0));
        }
        let (qz, qx) = qber(&TwoQubitState::maximally_mixed(), BellIndex::PSI_PLUS);
        assert_abs_diff_eq!(qz, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(qx, 0.5, epsilon = 1e-15);
        let rho0 = TwoQubitState::reference_pair();
        let (qz, qx) = qber(&rho0, BellIndex::PSI_PLUS);
        assert_abs_diff_eq!(qz, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(qx, 0.02, epsilon = 1e-12);
    }

    #[test]
    fn frame_folding_matches_rotated_target() {
        // Ψ- stored with a Z frame on the second qubit reads as Ψ+.
        let s = bell_state(BellIndex::PSI_MINUS).with_frame(PauliFrame(Pauli::I, Pauli::Z));
        assert_eq!(qber(&s, BellIndex::PSI_PLUS), (0.0, 0.0));
        assert_eq!(qber(&bell_state(BellIndex::PSI_MINUS), BellIndex::PSI_MINUS), (0.0, 0.0));
    }

    #[test]
    fn serde_round_trip() {
        let s = TwoQubitState::reference_pair().with_frame(PauliFrame(Pauli::X, Pauli::Z));
        let j = serde_json::to_string(&s).unwrap();
        let back: TwoQubitState = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
