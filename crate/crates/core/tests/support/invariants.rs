//! Randomized physics invariants shared by the property tests and the
//! acceptance run. Each property draws its cases from a fixed seed.

use hyrep::keyrate::{binary_entropy, secret_key_rate};
use hyrep::qstate::{
    apply_swap_error, bell_state, depolarize, entanglement_swap, qber, swap_outcome_probabilities,
    BellIndex, Mat4, TwoQubitState, C64,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type Property = fn(u32) -> Result<(), String>;

pub const PROPERTIES: [(&str, Property); 8] = [
    ("channels keep trace, Hermiticity and positivity", channels_preserve_state),
    ("depolarization composes over durations", depolarizing_composes),
    ("swap agrees with the explicit Kronecker product", swap_matches_kronecker),
    ("swap outcome probabilities sum to one", swap_outcomes_normalize),
    ("Werner weights multiply under swap", werner_weights_multiply),
    ("QBER of Bell-diagonal states", qber_of_bell_diagonal),
    ("binary entropy symmetry and concavity", entropy_shape),
    ("key rate vanishes exactly beyond the threshold", key_rate_threshold),
];

fn runner(cases: u32) -> TestRunner {
    let cfg = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(
    cases: u32,
    s: S,
    f: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&s, f).map_err(|e| e.to_string())
}

fn density() -> impl Strategy<Value = TwoQubitState> {
    prop::array::uniform32(-1.0f64..1.0).prop_map(|v| {
        let a = Mat4::from_fn(|r, c| C64::new(v[2 * (4 * r + c)], v[2 * (4 * r + c) + 1]));
        let m = a * a.adjoint();
        let tr = m.trace();
        let m = m / tr;
        TwoQubitState::new((m + m.adjoint()) * C64::new(0.5, 0.0)).expect("A A† is a state")
    })
}

fn bell() -> impl Strategy<Value = BellIndex> {
    (0u8..4).prop_map(|i| BellIndex::new(i).unwrap())
}

fn max_diff(a: &Mat4, b: &Mat4) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn is_state(s: &TwoQubitState) -> Result<(), TestCaseError> {
    prop_assert!(s.hermiticity_error() < 1e-12);
    prop_assert!((s.trace().re - 1.0).abs() < 1e-12 && s.trace().im.abs() < 1e-12);
    prop_assert!(s.min_eigenvalue() > -1e-9);
    Ok(())
}

fn channels_preserve_state(cases: u32) -> Result<(), String> {
    run(cases, (density(), 0.0f64..5.0, 0.01f64..10.0, 0.0f64..=1.0), |(rho, t, tc, eps)| {
        is_state(&depolarize(&rho, t, tc).unwrap())?;
        is_state(&apply_swap_error(&rho, eps).unwrap())?;
        Ok(())
    })
}

fn depolarizing_composes(cases: u32) -> Result<(), String> {
    run(cases, (density(), 0.0f64..2.0, 0.0f64..2.0, 0.1f64..5.0), |(rho, t1, t2, tc)| {
        let two = depolarize(&depolarize(&rho, t1, tc).unwrap(), t2, tc).unwrap();
        let one = depolarize(&rho, t1 + t2, tc).unwrap();
        prop_assert!(max_diff(&two.matrix, &one.matrix) < 1e-12);
        Ok(())
    })
}

/// `(I ⊗ |β><β| ⊗ I)(L ⊗ R)(I ⊗ |β><β| ⊗ I)` traced over the middle qubits.
fn kronecker_swap(left: &Mat4, right: &Mat4, outcome: BellIndex) -> (Mat4, f64) {
    let dl = DMatrix::from_fn(4, 4, |r, c| left[(r, c)]);
    let dr = DMatrix::from_fn(4, 4, |r, c| right[(r, c)]);
    let full = dl.kronecker(&dr);
    let b = outcome.amplitudes();
    let beta = DMatrix::from_fn(4, 4, |r, c| b[r] * b[c].conj());
    let id2 = DMatrix::<C64>::identity(2, 2);
    let proj = id2.kronecker(&beta).kronecker(&id2);
    let post = &proj * full * &proj;
    let mut out = Mat4::zeros();
    for a in 0..2 {
        for d in 0..2 {
            for ap in 0..2 {
                for dp in 0..2 {
                    for mid in 0..4 {
                        out[(2 * a + d, 2 * ap + dp)] +=
                            post[(8 * a + 2 * mid + d, 8 * ap + 2 * mid + dp)];
                    }
                }
            }
        }
    }
    let p = out.trace().re;
    (out, p)
}

fn swap_matches_kronecker(cases: u32) -> Result<(), String> {
    run(cases, (density(), density(), bell()), |(l, r, b)| {
        let (want, p) = kronecker_swap(&l.matrix, &r.matrix, b);
        prop_assume!(p > 1e-9);
        let (got, q) = entanglement_swap(&l, &r, b).unwrap();
        prop_assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        let want = want / C64::new(p, 0.0);
        prop_assert!(max_diff(&got.matrix, &want) < 1e-10);
        is_state(&got)?;
        Ok(())
    })
}

fn swap_outcomes_normalize(cases: u32) -> Result<(), String> {
    run(cases, (density(), density()), |(l, r)| {
        let p = swap_outcome_probabilities(&l, &r);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        Ok(())
    })
}

fn werner_weights_multiply(cases: u32) -> Result<(), String> {
    run(cases, (0.0f64..=1.0, 0.0f64..=1.0, bell()), |(w1, w2, b)| {
        let l = TwoQubitState::werner(BellIndex::PSI_PLUS, w1);
        let r = TwoQubitState::werner(BellIndex::PSI_PLUS, w2);
        let (out, p) = entanglement_swap(&l, &r, b).unwrap();
        prop_assert!((p - 0.25).abs() < 1e-12);
        let want = TwoQubitState::werner(BellIndex::PSI_PLUS, w1 * w2);
        prop_assert!(max_diff(&out.folded().matrix, &want.matrix) < 1e-12);
        Ok(())
    })
}

fn qber_of_bell_diagonal(cases: u32) -> Result<(), String> {
    run(cases, prop::array::uniform4(0.0f64..1.0), |raw| {
        let s: f64 = raw.iter().sum();
        prop_assume!(s > 1e-6);
        let lam = raw.map(|x| x / s);
        let mut m = Mat4::zeros();
        for (k, b) in BellIndex::ALL.iter().enumerate() {
            m += bell_state(*b).matrix * C64::new(lam[k], 0.0);
        }
        let rho = TwoQubitState::new(m).unwrap();
        let (qz, qx) = qber(&rho, BellIndex::PSI_PLUS);
        let [phi_p, phi_m, _psi_p, psi_m] = lam;
        prop_assert!((qz - (phi_p + phi_m)).abs() < 1e-12);
        prop_assert!((qx - (psi_m + phi_m)).abs() < 1e-12);
        Ok(())
    })
}

fn entropy_shape(cases: u32) -> Result<(), String> {
    run(cases, (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), |(a, b, lam)| {
        let h = |q: f64| binary_entropy(q).unwrap();
        prop_assert!((h(a) - h(1.0 - a)).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&h(a)));
        let mid = lam * a + (1.0 - lam) * b;
        prop_assert!(h(mid) >= lam * h(a) + (1.0 - lam) * h(b) - 1e-12);
        Ok(())
    })
}

/// Natural-log entropy, independent of the library's base-2 form.
fn entropy_oracle(q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    -(q * q.ln() + (1.0 - q) * (1.0 - q).ln()) / std::f64::consts::LN_2
}

/// Symmetric QBER at which `1 - 2 H(q)` crosses zero.
pub fn threshold_by_bisection() -> f64 {
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - 2.0 * entropy_oracle(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn key_rate_threshold(cases: u32) -> Result<(), String> {
    let qs = threshold_by_bisection();
    if (qs - 0.11003).abs() > 5e-6 {
        return Err(format!("threshold {qs}"));
    }
    run(cases, (0.0f64..=0.5, 0.0f64..=0.5, 1e-3f64..1e6), |(qx, qz, r)| {
        let f = 1.0 - entropy_oracle(qx) - entropy_oracle(qz);
        prop_assume!(f.abs() > 1e-9);
        let got = secret_key_rate(qx, qz, r).unwrap();
        if f > 0.0 {
            prop_assert!((got - f * r).abs() <= 1e-9 * r);
        } else {
            prop_assert_eq!(got, 0.0);
        }
        let sym = secret_key_rate(qx, qx, r).unwrap();
        prop_assert_eq!(sym > 0.0, qx < qs);
        Ok(())
    })
}

