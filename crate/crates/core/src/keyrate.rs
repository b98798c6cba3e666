//! BB84 key rates from chain statistics, and the sweeps over repeater count
//! and cutoff.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{run_chain, AggregateResult, ChainConfig, ChainError};
use crate::linklayer::memory_modes_required;

#[derive(Debug, Error)]
pub enum KeyRateError {
    #[error("{0}")]
    Domain(String),
    #[error("invalid sweep grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary entropy in bits.
pub fn binary_entropy(q: f64) -> Result<f64, KeyRateError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(KeyRateError::Domain(format!("q must be in [0, 1], got {q}")));
    }
    if q == 0.0 || q == 1.0 {
        return Ok(0.0);
    }
    Ok(-q * q.log2() - (1.0 - q) * (1.0 - q).log2())
}

/// Asymptotic key rate without the basis-sifting factor.
pub fn secret_key_rate(q_x: f64, q_z: f64, r_suc: f64) -> Result<f64, KeyRateError> {
    let f = 1.0 - binary_entropy(q_x)? - binary_entropy(q_z)?;
    Ok(f.max(0.0) * r_suc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub total_length: f64,
    pub n_repeaters: u32,
    pub n_transfer_rb: u32,
    pub epsilon: f64,
    pub cutoff: f64,
    pub r_suc: f64,
    pub r_suc_stderr: f64,
    pub r_suc_pooled: f64,
    pub q_z: f64,
    pub q_x: f64,
    pub r_sk: f64,
    pub r_sk_per_segment: f64,
    pub n_mode: u64,
    pub incomplete_trials: usize,
}

/// Runs the chain for `config` and converts the outcome to a key rate.
pub fn evaluate(config: &ChainConfig) -> Result<KeyRateResult, KeyRateError> {
    let (_, agg) = run_chain(config)?;
    key_rate_from(config, &agg)
}

/// Key rate of an already aggregated run of `config`.
pub fn key_rate_from(config: &ChainConfig, agg: &AggregateResult) -> Result<KeyRateResult, KeyRateError> {
    let r_sk = secret_key_rate(agg.q_x, agg.q_z, agg.r_suc)?;
    let n_seg = config.n_segments();
    Ok(KeyRateResult {
        total_length: config.total_length,
        n_repeaters: config.n_repeaters,
        n_transfer_rb: config.n_transfer_rb,
        epsilon: config.swap_error,
        cutoff: config.cutoff,
        r_suc: agg.r_suc,
        r_suc_stderr: agg.r_suc_stderr,
        r_suc_pooled: agg.r_suc_pooled,
        q_z: agg.q_z,
        q_x: agg.q_x,
        r_sk,
        r_sk_per_segment: r_sk / n_seg as f64,
        n_mode: memory_modes_required(config.total_length, n_seg, &config.link),
        incomplete_trials: agg.incomplete_trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// km
    pub distances: Vec<f64>,
    pub repeater_counts: Vec<u32>,
    /// s
    pub cutoffs: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub n_transfer_rb: Vec<u32>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), KeyRateError> {
        if self.distances.is_empty()
            || self.repeater_counts.is_empty()
            || self.cutoffs.is_empty()
            || self.epsilons.is_empty()
            || self.n_transfer_rb.is_empty()
        {
            return Err(KeyRateError::Grid("every axis needs at least one value".into()));
        }
        if let Some(d) = self.distances.iter().find(|d| !(**d > 0.0)) {
            return Err(KeyRateError::Grid(format!("distances must be > 0, got {d}")));
        }
        Ok(())
    }

    /// Every grid point, with its coordinates as indices.
    fn points(&self) -> Vec<[usize; 5]> {
        let mut v = Vec::new();
        for il in 0..self.distances.len() {
            for ie in 0..self.epsilons.len() {
                for it in 0..self.n_transfer_rb.len() {
                    for ir in 0..self.repeater_counts.len() {
                        for ic in 0..self.cutoffs.len() {
                            v.push([il, ie, it, ir, ic]);
                        }
                    }
                }
            }
        }
        v
    }
}

/// Seed of a grid point, derived from its coordinates only.
fn point_seed(base: u64, idx: [usize; 5]) -> u64 {
    let mut z = base;
    for i in idx {
        z = z.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64 + 1);
        z ^= z >> 29;
    }
    z
}

/// Configuration of every grid point, in grid order.
pub fn grid_configs(grid: &SweepGrid, base: &ChainConfig) -> Result<Vec<ChainConfig>, KeyRateError> {
    grid.validate()?;
    Ok(grid
        .points()
        .into_iter()
        .map(|idx| {
            let [il, ie, it, ir, ic] = idx;
            ChainConfig {
                total_length: grid.distances[il],
                swap_error: grid.epsilons[ie],
                n_transfer_rb: grid.n_transfer_rb[it],
                n_repeaters: grid.repeater_counts[ir],
                cutoff: grid.cutoffs[ic],
                seed: point_seed(base.seed, idx),
                ..base.clone()
            }
        })
        .collect())
}

/// Evaluates every point of `grid` and keeps failures in place.
pub fn sweep_each(
    grid: &SweepGrid,
    base: &ChainConfig,
) -> Result<Vec<(ChainConfig, Result<KeyRateResult, KeyRateError>)>, KeyRateError> {
    Ok(grid_configs(grid, base)?
        .into_par_iter()
        .map(|cfg| {
            let r = evaluate(&cfg);
            (cfg, r)
        })
        .collect())
}

/// Evaluates every point of `grid`; the result order follows the grid and
/// does not depend on scheduling.
pub fn sweep(grid: &SweepGrid, base: &ChainConfig) -> Result<Vec<KeyRateResult>, KeyRateError> {
    sweep_each(grid, base)?.into_iter().map(|(_, r)| r).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumRow {
    pub best: KeyRateResult,
    /// True when no grid point gave a positive key rate.
    pub all_zero: bool,
}

/// Strict preference of `a` over `b`: higher per-segment rate, then fewer
/// repeaters, then shorter cutoff.
fn better(a: &KeyRateResult, b: &KeyRateResult) -> bool {
    match a.r_sk_per_segment.total_cmp(&b.r_sk_per_segment) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            (a.n_repeaters, a.cutoff.to_bits()) < (b.n_repeaters, b.cutoff.to_bits())
        }
    }
}

fn same_case(a: &KeyRateResult, b: &KeyRateResult) -> bool {
    a.total_length == b.total_length && a.epsilon == b.epsilon && a.n_transfer_rb == b.n_transfer_rb
}

/// Best point for every (distance, epsilon, transducer count) in `results`,
/// in order of first appearance.
pub fn select_optima(results: &[KeyRateResult]) -> Vec<OptimumRow> {
    let mut rows: Vec<OptimumRow> = Vec::new();
    for r in results {
        match rows.iter_mut().find(|o| same_case(&o.best, r)) {
            Some(o) => {
                if better(r, &o.best) {
                    o.best = r.clone();
                }
                o.all_zero &= r.r_sk <= 0.0;
            }
            None => rows.push(OptimumRow {
                best: r.clone(),
                all_zero: r.r_sk <= 0.0,
            }),
        }
    }
    rows
}

/// Sweeps the grid and keeps the best repeater count and cutoff per case.
pub fn optimize_chain(
    grid: &SweepGrid,
    base: &ChainConfig,
) -> Result<(Vec<OptimumRow>, Vec<KeyRateResult>), KeyRateError> {
    let all = sweep(grid, base)?;
    Ok((select_optima(&all), all))
}

/// Key rate of a single segment spanning the whole distance.
pub fn direct_link_baseline(total_length: f64, config: &ChainConfig) -> Result<f64, KeyRateError> {
    if !(total_length > 0.0) {
        return Err(KeyRateError::Domain(format!(
            "distance must be > 0, got {total_length}"
        )));
    }
    let cfg = ChainConfig {
        total_length,
        n_repeaters: 0,
        ..config.clone()
    };
    Ok(evaluate(&cfg)?.r_sk)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub repeater_counts: Vec<u32>,
    pub distances: Vec<f64>,
    /// `values[row][col]` is `log10(R_SK / N_seg)`, `-inf` for zero rate,
    /// `None` where the point was not evaluated.
    pub values: Vec<Vec<Option<f64>>>,
    /// Row of the maximum per column.
    pub best_row: Vec<Option<usize>>,
}

/// Repeater-count by distance grid for one (epsilon, transducer count),
/// taking the best cutoff at each cell.
pub fn emit_heatmap(results: &[KeyRateResult], epsilon: f64, n_transfer_rb: u32) -> Heatmap {
    let sel: Vec<&KeyRateResult> = results
        .iter()
        .filter(|r| r.epsilon == epsilon && r.n_transfer_rb == n_transfer_rb)
        .collect();
    let mut reps: Vec<u32> = sel.iter().map(|r| r.n_repeaters).collect();
    reps.sort_unstable();
    reps.dedup();
    let mut dists: Vec<f64> = sel.iter().map(|r| r.total_length).collect();
    dists.sort_by(f64::total_cmp);
    dists.dedup();
    let mut cells: Vec<Vec<Option<&KeyRateResult>>> = vec![vec![None; dists.len()]; reps.len()];
    for r in &sel {
        let i = reps.binary_search(&r.n_repeaters).expect("row present");
        let j = dists.iter().position(|d| *d == r.total_length).expect("column present");
        match cells[i][j] {
            Some(c) if !better(r, c) => {}
            _ => cells[i][j] = Some(r),
        }
    }
    let values = cells
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| {
                    c.map(|r| {
                        if r.r_sk_per_segment > 0.0 {
                            r.r_sk_per_segment.log10()
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                })
                .collect()
        })
        .collect();
    let best_row = (0..dists.len())
        .map(|j| {
            let mut best: Option<(usize, &KeyRateResult)> = None;
            for (i, row) in cells.iter().enumerate() {
                if let Some(c) = row[j] {
                    if best.map_or(true, |(_, b)| better(c, b)) {
                        best = Some((i, c));
                    }
                }
            }
            best.map(|(i, _)| i)
        })
        .collect();
    Heatmap {
        repeater_counts: reps,
        distances: dists,
        values,
        best_row,
    }
}

pub const RATES_HEADER: &str = "L_km,n_rep,n_tRb,epsilon,t_cut_s,R_suc_hz,Q_Z,Q_X,R_SK_bps,R_SK_per_seg_bps,N_mode,stderr_R_suc,R_suc_pooled_hz";

pub fn write_rates_csv<W: Write>(mut w: W, rows: &[KeyRateResult]) -> std::io::Result<()> {
    writeln!(w, "{RATES_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e}",
            r.total_length,
            r.n_repeaters,
            r.n_transfer_rb,
            r.epsilon,
            r.cutoff,
            r.r_suc,
            r.q_z,
            r.q_x,
            r.r_sk,
            r.r_sk_per_segment,
            r.n_mode,
            r.r_suc_stderr,
            r.r_suc_pooled
        )?;
    }
    Ok(())
}

/// Rows are repeater counts, columns distances; the best cell of each
/// column carries a trailing `*`. Unevaluated cells are empty.
pub fn write_heatmap_csv<W: Write>(mut w: W, h: &Heatmap) -> std::io::Result<()> {
    write!(w, "n_rep")?;
    for d in &h.distances {
        write!(w, ",{d}")?;
    }
    writeln!(w)?;
    for (i, row) in h.values.iter().enumerate() {
        write!(w, "{}", h.repeater_counts[i])?;
        for (j, v) in row.iter().enumerate() {
            let mark = if h.best_row[j] == Some(i) { "*" } else { "" };
            match v {
                None => write!(w, ",")?,
                Some(x) if x.is_infinite() => write!(w, ",-inf{mark}")?,
                Some(x) => write!(w, ",{x:.4}{mark}")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
