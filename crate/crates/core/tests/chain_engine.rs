use std::collections::HashMap;

use hyrep::chain::{
    analytic_two_segment_oracle, run_chain, run_trial, run_trial_logged, ChainConfig,
};
use hyrep::linklayer::attempt_success_prob;
use hyrep::qstate::{fidelity, BellIndex, TwoQubitState};

fn ideal_two_segment(p: Vec<f64>) -> ChainConfig {
    let mut c = ChainConfig {
        total_length: 100.0,
        n_repeaters: 1,
        swap_success: 1.0,
        transfer_success: 1.0,
        swap_error: 0.0,
        cutoff: 1e3,
        successes_per_trial: 1,
        n_trials: 1,
        attempt_prob_override: Some(p),
        ..ChainConfig::default()
    };
    c.link.memory_t2 = 1e12;
    c
}

fn mean_first_success(cfg: &ChainConfig, n: u64) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        let t = run_trial(cfg, i).unwrap();
        assert!(t.completed);
        sum += t.total_time;
    }
    sum / n as f64
}

#[test]
fn same_seed_gives_identical_trials() {
    let cfg = ChainConfig {
        total_length: 300.0,
        n_repeaters: 3,
        ..ChainConfig::default()
    };
    assert_eq!(run_trial(&cfg, 4).unwrap(), run_trial(&cfg, 4).unwrap());
    assert_ne!(run_trial(&cfg, 4).unwrap(), run_trial(&cfg, 5).unwrap());
}

#[test]
fn delivered_fidelity_never_exceeds_source() {
    let cfg = ChainConfig {
        total_length: 300.0,
        n_repeaters: 3,
        swap_error: 1e-2,
        ..ChainConfig::default()
    };
    let f0 = fidelity(&cfg.pair_state, BellIndex::PSI_PLUS);
    let (trials, agg) = run_chain(&cfg).unwrap();
    assert_eq!(agg.total_successes, 1000);
    for t in &trials {
        for s in &t.end_to_end_states {
            s.validate().unwrap();
            assert!(fidelity(s, BellIndex::PSI_PLUS) <= f0 + 1e-9);
        }
    }
}

#[test]
fn two_segment_mean_time_matches_oracle() {
    let cfg = ideal_two_segment(vec![0.1]);
    let oracle = analytic_two_segment_oracle(&cfg).unwrap();
    let p = 0.1;
    assert!((oracle.expected_slots - (3.0 - 2.0 * p) / (p * (2.0 - p))).abs() < 1e-12);
    let got = mean_first_success(&cfg, 100_000);
    let rel = (got - oracle.expected_time) / oracle.expected_time;
    assert!(rel.abs() < 0.02, "{got} vs {}", oracle.expected_time);
}

#[test]
fn asymmetric_two_segment_mean_time_matches_oracle() {
    let cfg = ideal_two_segment(vec![0.05, 0.2]);
    let oracle = analytic_two_segment_oracle(&cfg).unwrap();
    let got = mean_first_success(&cfg, 100_000);
    let rel = (got - oracle.expected_time) / oracle.expected_time;
    assert!(rel.abs() < 0.02, "{got} vs {}", oracle.expected_time);
}

#[test]
fn certain_attempts_take_one_slot() {
    let cfg = ideal_two_segment(vec![1.0]);
    let o = analytic_two_segment_oracle(&cfg).unwrap();
    assert_eq!(o.expected_slots, 1.0);
    let t = run_trial(&cfg, 0).unwrap();
    assert!((t.total_time - o.expected_time).abs() < 1e-15);
}

#[derive(serde::Deserialize)]
struct Line {
    time: f64,
    site: String,
    event: String,
    link: Option<usize>,
}

fn logged(cfg: &ChainConfig) -> Vec<Line> {
    let mut buf = Vec::new();
    run_trial_logged(cfg, 0, Some(&mut buf)).unwrap();
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn log_shows_no_consumption_after_cutoff() {
    let cfg = ChainConfig {
        total_length: 200.0,
        n_repeaters: 3,
        n_transfer_rb: 2,
        cutoff: 2e-4,
        successes_per_trial: 50,
        ..ChainConfig::default()
    };
    let lines = logged(&cfg);
    let mut born = HashMap::new();
    let mut swaps = 0;
    let mut expiries = 0;
    for l in &lines {
        match l.event.as_str() {
            "transferred" | "swapped" => {
                born.insert(l.link.unwrap(), l.time);
            }
            "swap_start" => {
                let t0 = born[&l.link.unwrap()];
                assert!(l.time - t0 <= cfg.cutoff * (1.0 + 1e-12), "{} at {}", l.site, l.time);
                swaps += 1;
            }
            "expired" => expiries += 1,
            _ => {}
        }
    }
    assert!(swaps > 0 && expiries > 0, "{swaps} swaps, {expiries} expiries");
    assert_eq!(lines.iter().filter(|l| l.event == "delivered").count(), 50);
}

#[test]
fn heralds_are_spaced_by_at_least_one_attempt() {
    let cfg = ChainConfig {
        total_length: 40.0,
        n_repeaters: 1,
        successes_per_trial: 200,
        ..ChainConfig::default()
    };
    let min_gap = 1.0 / cfg.link.repetition_rate;
    let mut last: HashMap<String, f64> = HashMap::new();
    let mut n = 0;
    for l in logged(&cfg).iter().filter(|l| l.event == "herald") {
        if let Some(prev) = last.insert(l.site.clone(), l.time) {
            assert!(l.time - prev >= min_gap * (1.0 - 1e-9), "{}: {}", l.site, l.time - prev);
        }
        n += 1;
    }
    assert!(n > 400);
}

#[test]
fn vanishing_cutoff_yields_no_successes() {
    // Long segments make coincident heralds, the only way to beat a tiny
    // cutoff, practically impossible within the budget.
    let cfg = ChainConfig {
        total_length: 600.0,
        n_repeaters: 1,
        cutoff: 1e-12,
        event_budget: 10_000,
        n_trials: 2,
        ..ChainConfig::default()
    };
    let (trials, agg) = run_chain(&cfg).unwrap();
    assert_eq!(agg.total_successes, 0);
    assert_eq!(agg.r_suc, 0.0);
    assert!(trials.iter().all(|t| !t.completed && t.events == 10_000));
}

#[test]
fn short_direct_link_runs_at_source_rate() {
    let cfg = ChainConfig {
        total_length: 1e-3,
        n_repeaters: 0,
        successes_per_trial: 20_000,
        n_trials: 4,
        ..ChainConfig::default()
    };
    let expected = cfg.link.repetition_rate * 0.49 * 0.99 * 0.99;
    let (trials, agg) = run_chain(&cfg).unwrap();
    assert!(((agg.r_suc_pooled - expected) / expected).abs() < 0.02, "{}", agg.r_suc_pooled);
    for t in &trials {
        assert!(t.end_to_end_states.iter().all(|s| *s == cfg.pair_state));
    }
}

#[test]
fn ideal_swap_of_werner_pairs_multiplies_weights() {
    let w = 0.9;
    let mut cfg = ideal_two_segment(vec![0.3]);
    cfg.pair_state = TwoQubitState::werner(BellIndex::PSI_PLUS, w);
    cfg.spin_coherence = 1e12;
    cfg.successes_per_trial = 50;
    let want = TwoQubitState::werner(BellIndex::PSI_PLUS, w * w);
    let t = run_trial(&cfg, 0).unwrap();
    for s in &t.end_to_end_states {
        let d = s.folded().matrix - want.matrix;
        assert!(d.iter().all(|z| z.norm() < 1e-9), "{d}");
    }
    // Finite spin coherence only lowers the result.
    cfg.spin_coherence = 1e-3;
    let t = run_trial(&cfg, 0).unwrap();
    let f_max = fidelity(&want, BellIndex::PSI_PLUS);
    assert!(t
        .end_to_end_states
        .iter()
        .all(|s| fidelity(s, BellIndex::PSI_PLUS) <= f_max + 1e-9));
}

#[test]
fn rate_falls_with_distance() {
    let rate = |l: f64| {
        let cfg = ChainConfig {
            total_length: l,
            n_repeaters: 1,
            n_trials: 8,
            ..ChainConfig::default()
        };
        run_chain(&cfg).unwrap().1
    };
    let (a, b) = (rate(100.0), rate(200.0));
    assert!(a.r_suc - b.r_suc > -3.0 * (a.r_suc_stderr + b.r_suc_stderr));
    assert!(a.r_suc > b.r_suc);
}

#[test]
fn unreachable_link_is_rejected() {
    let cfg = ChainConfig {
        attempt_prob_override: Some(vec![0.0]),
        ..ChainConfig::default()
    };
    let e = run_chain(&cfg).unwrap_err().to_string();
    assert!(e.contains("no entanglement can ever be heralded"), "{e}");
    let cfg = ChainConfig {
        n_repeaters: 1,
        attempt_prob_override: Some(vec![0.1, 0.2, 0.3]),
        ..ChainConfig::default()
    };
    assert!(run_chain(&cfg).is_err());
    let l = ChainConfig::default().segment_link();
    assert!(attempt_success_prob(&l) > 0.0);
}
