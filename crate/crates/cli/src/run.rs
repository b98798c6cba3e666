//! Executes a resolved manifest and writes its artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hyrep::chain::{run_chain, run_trial_logged, ChainConfig};
use hyrep::emitter::calibrate::calibrate_pause;
use hyrep::emitter::{elementary_pair_model, evolve, scan_detuning, DriveProfile, InitialState};
use hyrep::keyrate::{
    emit_heatmap, key_rate_from, select_optima, sweep_each, write_heatmap_csv, write_rates_csv,
    KeyRateResult,
};
use hyrep::linklayer::{memory_modes_required, retrieval_efficiency};
use log::{info, warn};
use serde::Serialize;

use crate::config::{Mode, PairSource, RunManifest};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a run produced.
#[derive(Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Grid points or stages that failed; their rows are missing from the
    /// artifacts and marked in them.
    pub failures: Vec<String>,
}

#[derive(Serialize)]
struct ManifestEcho<'a> {
    version: &'a str,
    config_hash: String,
    seed: u64,
    mode: Mode,
    config_path: Option<String>,
    values: std::collections::BTreeMap<&'static str, String>,
}

struct Sink<'a> {
    dir: &'a Path,
    stamp: String,
    report: RunReport,
}

impl Sink<'_> {
    /// Creates `name` in the output directory with the stamp line on top.
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        writeln!(w, "{}", self.stamp)?;
        self.report.files.push(path);
        Ok(w)
    }
}

pub fn run(m: &RunManifest) -> Result<RunReport> {
    m.validate()?;
    fs::create_dir_all(&m.out_dir)
        .with_context(|| format!("creating {}", m.out_dir.display()))?;
    let hash = m.config_hash();
    let mut sink = Sink {
        dir: &m.out_dir,
        stamp: format!("# hyrep {VERSION} config_hash={hash} seed={}", m.seed),
        report: RunReport::default(),
    };

    let echo = ManifestEcho {
        version: VERSION,
        config_hash: hash.clone(),
        seed: m.seed,
        mode: m.mode,
        config_path: m.config_path.as_ref().map(|p| p.display().to_string()),
        values: m.values(),
    };
    let path = m.out_dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&echo)? + "\n")?;
    sink.report.files.push(path);
    let mut cfg = sink.create("manifest.cfg")?;
    cfg.write_all(m.emit().as_bytes())?;
    cfg.flush()?;

    info!("mode {:?}, config hash {hash}", m.mode);
    match m.mode {
        Mode::Emitter => emitter_mode(m, &mut sink)?,
        Mode::Link => link_mode(m, &mut sink)?,
        Mode::Chain => chain_mode(m, &mut sink)?,
        Mode::Sweep | Mode::Heatmap => sweep_mode(m, &mut sink)?,
    }
    Ok(sink.report)
}

fn drive(m: &RunManifest) -> Result<DriveProfile> {
    if m.calibrate {
        let cal = calibrate_pause(&m.emitter, &m.drive)?;
        info!(
            "pause start {:.4e} s balances the bins at {:.4}",
            cal.template.pause_start, cal.early
        );
        Ok(cal.profile)
    } else {
        Ok(m.drive.profile()?)
    }
}

fn emitter_mode(m: &RunManifest, sink: &mut Sink) -> Result<()> {
    let profile = drive(m)?;
    let rec = evolve(&m.emitter, &profile, m.emitter.mean_couplings(), &InitialState::Ground, None)?;
    let mut w = sink.create("emission.csv")?;
    writeln!(
        w,
        "# bin_boundary_s={:e} success_probability={:e} emitted_by_60ns={:.6}",
        rec.bin_boundary,
        rec.success_probability,
        rec.emitted_fraction_by(60e-9)
    )?;
    rec.write_csv(&mut w)?;
    w.flush()?;

    let mut w = sink.create("drive.csv")?;
    writeln!(w, "t_s,amplitude_hz")?;
    for t in &rec.times {
        writeln!(w, "{:e},{:e}", t, profile.amplitude_at(*t))?;
    }
    w.flush()?;

    if m.scan_points > 0 {
        let (lo, hi) = m.scan_range;
        let n = m.scan_points;
        let grid: Vec<f64> = if n == 1 {
            vec![lo]
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        let scan = scan_detuning(&m.emitter, &profile, &grid)?;
        let mut w = sink.create("scan.csv")?;
        writeln!(w, "delta_hz,right_proportion,right_share")?;
        for p in &scan {
            match (p.proportion, p.right_share) {
                (Some(a), Some(b)) => writeln!(w, "{:e},{:e},{:e}", p.delta, a, b)?,
                _ => {
                    let e = p.error.clone().unwrap_or_default();
                    writeln!(w, "# FAILED delta_hz={:e}: {e}", p.delta)?;
                    sink.report.failures.push(format!("scan at {:e} Hz: {e}", p.delta));
                }
            }
        }
        w.flush()?;
    }

    if m.pair_samples > 0 {
        let r = elementary_pair_model(&m.emitter, &profile, m.pair_samples, m.seed)?;
        let mut w = sink.create("pair.csv")?;
        writeln!(
            w,
            "# p_success={:e} p_success_stderr={:e} fidelity={:.6} samples={}",
            r.p_success, r.p_success_stderr, r.fidelity, r.n_samples
        )?;
        write_matrix(&mut w, &r.rho0.matrix)?;
        w.flush()?;
    }
    Ok(())
}

fn write_matrix<W: Write>(w: &mut W, rho: &hyrep::qstate::Mat4) -> std::io::Result<()> {
    writeln!(w, "row,col,re,im")?;
    for i in 0..4 {
        for j in 0..4 {
            let z = rho[(i, j)];
            writeln!(w, "{i},{j},{:e},{:e}", z.re, z.im)?;
        }
    }
    Ok(())
}

fn link_mode(m: &RunManifest, sink: &mut Sink) -> Result<()> {
    let mut w = sink.create("link.csv")?;
    writeln!(
        w,
        "L_km,n_rep,segment_km,p_att,herald_latency_s,slot_s,N_mode,mean_wait_s,retrieval_at_t_cut"
    )?;
    for &n_rep in &m.grid.repeater_counts {
        let cfg = ChainConfig {
            n_repeaters: n_rep,
            ..m.chain.clone()
        };
        let link = cfg.segment_link();
        let p = cfg.attempt_prob();
        let slot = cfg.slot_time();
        writeln!(
            w,
            "{},{},{},{:e},{:e},{:e},{},{:e},{:e}",
            cfg.total_length,
            n_rep,
            cfg.segment_length(),
            p,
            link.herald_latency(),
            slot,
            memory_modes_required(cfg.total_length, cfg.n_segments(), &cfg.link),
            if p > 0.0 { slot / p + link.herald_latency() } else { f64::INFINITY },
            retrieval_efficiency(cfg.cutoff, cfg.link.memory_t2),
        )?;
    }
    w.flush()?;
    Ok(())
}

fn chain_config(m: &RunManifest) -> Result<ChainConfig> {
    let mut cfg = m.chain.clone();
    if m.pair_source == PairSource::Model {
        let samples = m.pair_samples.max(1);
        let r = elementary_pair_model(&m.emitter, &drive(m)?, samples, m.seed)?;
        info!("pair model: p_success {:.4}, fidelity {:.4}", r.p_success, r.fidelity);
        cfg.pair_state = r.rho0;
        cfg.link.pair_success = r.p_success;
    }
    Ok(cfg)
}

fn chain_mode(m: &RunManifest, sink: &mut Sink) -> Result<()> {
    let cfg = chain_config(m)?;
    let (trials, agg) = run_chain(&cfg)?;
    let mut w = sink.create("trials.csv")?;
    writeln!(w, "trial,successes,total_time_s,rate_hz,completed,events")?;
    for (i, t) in trials.iter().enumerate() {
        let rate = if t.total_time > 0.0 { t.successes() as f64 / t.total_time } else { 0.0 };
        writeln!(
            w,
            "{i},{},{:e},{:e},{},{}",
            t.successes(),
            t.total_time,
            rate,
            t.completed,
            t.events
        )?;
        if !t.completed {
            sink.report
                .failures
                .push(format!("trial {i} hit the event budget after {} successes", t.successes()));
        }
    }
    w.flush()?;
    let kr = key_rate_from(&cfg, &agg)?;
    let mut w = sink.create("rates.csv")?;
    write_rates_csv(&mut w, std::slice::from_ref(&kr))?;
    w.flush()?;
    if let Some(s) = &agg.mean_state {
        let mut w = sink.create("state.csv")?;
        writeln!(w, "# mean end-to-end state, frame corrected")?;
        write_matrix(&mut w, &s.matrix)?;
        w.flush()?;
    }
    if m.event_log {
        let mut w = sink.create("events.jsonl")?;
        run_trial_logged(&cfg, 0, Some(&mut w))?;
        w.flush()?;
    }
    Ok(())
}

fn sweep_mode(m: &RunManifest, sink: &mut Sink) -> Result<()> {
    let base = chain_config(m)?;
    let points = sweep_each(&m.grid, &base)?;
    let mut ok: Vec<KeyRateResult> = Vec::new();
    let mut failed = Vec::new();
    for (cfg, r) in points {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => {
                let msg = format!(
                    "L_km={} n_rep={} n_tRb={} epsilon={:e} t_cut_s={:e}: {e}",
                    cfg.total_length, cfg.n_repeaters, cfg.n_transfer_rb, cfg.swap_error, cfg.cutoff
                );
                warn!("grid point failed: {msg}");
                failed.push(msg);
            }
        }
    }
    let mut w = sink.create("rates.csv")?;
    write_rates_csv(&mut w, &ok)?;
    for f in &failed {
        writeln!(w, "# FAILED {f}")?;
    }
    w.flush()?;

    let mut w = sink.create("optima.csv")?;
    writeln!(w, "L_km,epsilon,n_tRb,best_n_rep,best_t_cut_s,R_SK_bps,R_SK_per_seg_bps,all_zero")?;
    for o in select_optima(&ok) {
        let b = &o.best;
        writeln!(
            w,
            "{},{:e},{},{},{:e},{:e},{:e},{}",
            b.total_length, b.epsilon, b.n_transfer_rb, b.n_repeaters, b.cutoff, b.r_sk,
            b.r_sk_per_segment, o.all_zero
        )?;
    }
    w.flush()?;

    if m.mode == Mode::Heatmap {
        let combos: Vec<(f64, u32)> = m
            .grid
            .epsilons
            .iter()
            .flat_map(|&e| m.grid.n_transfer_rb.iter().map(move |&n| (e, n)))
            .collect();
        for &(eps, ntrb) in &combos {
            let h = emit_heatmap(&ok, eps, ntrb);
            let name = if combos.len() == 1 {
                "heatmap.csv".to_string()
            } else {
                format!("heatmap_eps{eps:e}_ntrb{ntrb}.csv")
            };
            let mut w = sink.create(&name)?;
            writeln!(w, "# log10(R_SK/N_seg) for epsilon={eps:e} n_tRb={ntrb}; * marks the best n_rep per distance")?;
            write_heatmap_csv(&mut w, &h)?;
            w.flush()?;
        }
    }
    sink.report.failures.extend(failed);
    Ok(())
}
