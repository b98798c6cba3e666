use hyrep::linklayer::{
    attempt_success_prob, fiber_transmission, retrieval_efficiency, sample_entanglement_time,
    sample_geometric, sample_slots, LinkParams,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson statistic of `draws` against geometric(p) on 1..=k plus a tail bin.
fn chi_square(draws: &[u64], p: f64, k: u64) -> (f64, f64) {
    let n = draws.len() as f64;
    let mut observed = vec![0.0; k as usize + 1];
    for &d in draws {
        observed[(d.min(k + 1) - 1) as usize] += 1.0;
    }
    let mut stat = 0.0;
    for (i, o) in observed.iter().enumerate() {
        let slot = i as i32 + 1;
        let prob = if (slot as u64) <= k {
            (1.0 - p).powi(slot - 1) * p
        } else {
            (1.0 - p).powi(k as i32)
        };
        let e = n * prob;
        stat += (o - e) * (o - e) / e;
    }
    (stat, k as f64)
}

#[test]
fn success_slots_pass_chi_square_at_one_percent() {
    let p = 0.2;
    let link = LinkParams {
        segment_length: 50.0,
        ..LinkParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws: Vec<u64> = (0..100_000)
        .map(|_| sample_entanglement_time(p, &link, &mut rng).0)
        .collect();
    let (stat, dof) = chi_square(&draws, p, 25);
    let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi2 {stat} >= {critical}");
    let mean = draws.iter().sum::<u64>() as f64 / draws.len() as f64;
    assert!((mean * p - 1.0).abs() < 0.02, "mean {mean}");
}

#[test]
fn fractional_slot_sampler_has_the_same_law() {
    let p = 0.07;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws: Vec<u64> = (0..100_000)
        .map(|_| {
            let s = sample_slots(p, &mut rng);
            assert_eq!(s.fract(), 0.0);
            s as u64
        })
        .collect();
    let (stat, dof) = chi_square(&draws, p, 60);
    assert!(stat < ChiSquared::new(dof).unwrap().inverse_cdf(0.99), "{stat}");
    // Tiny probabilities do not saturate.
    assert!(sample_slots(1e-25, &mut rng) > 1e20);
}

#[test]
fn sampling_is_reproducible() {
    let draw = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..100).map(|_| sample_geometric(0.01, &mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(draw(), draw());
}

proptest! {
    #[test]
    fn transmission_is_multiplicative(a in 0.0f64..300.0, b in 0.0f64..300.0, att in 0.0f64..1.0) {
        let lhs = fiber_transmission(a + b, att);
        let rhs = fiber_transmission(a, att) * fiber_transmission(b, att);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300));
    }

    #[test]
    fn attempt_probability_falls_with_length(a in 0.0f64..500.0, d in 1e-3f64..100.0) {
        let at = |l: f64| attempt_success_prob(&LinkParams { segment_length: l, ..LinkParams::default() });
        prop_assert!(at(a + d) < at(a));
        prop_assert!(at(a) <= 0.49);
    }

    #[test]
    fn retrieval_decreases_within_unit_interval(t in 0.0f64..0.02, d in 1e-6f64..1e-3) {
        let r = retrieval_efficiency(t, 2.6e-3);
        prop_assert!(r > 0.0 && r <= 1.0);
        prop_assert!(retrieval_efficiency(t + d, 2.6e-3) < r);
    }
}
