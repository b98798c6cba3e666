//! Command-line front end: configuration files, flag overrides and the run
//! modes that write CSV artifacts.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::Parser;

pub use config::{parse_config, parse_config_str, ConfigError, Mode, RunManifest};
pub use run::{run, RunReport};

#[derive(Debug, Parser)]
#[command(name = "hyrep", version, about = "Hybrid quantum repeater chain simulator")]
pub struct Cli {
    /// Key-value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub distance_km: Option<f64>,
    #[arg(long)]
    pub n_rep: Option<u32>,
    #[arg(long)]
    pub n_trb: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_cut_s: Option<f64>,
    #[arg(long)]
    pub trials: Option<u32>,
    #[arg(long)]
    pub successes: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write events.jsonl for the first chain trial.
    #[arg(long)]
    pub event_log: bool,
    /// Any configuration key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// List configuration keys and exit.
    #[arg(long)]
    pub list_keys: bool,
}

impl Cli {
    /// Flag overrides as configuration pairs. Dedicated flags win over
    /// `--set` for the same key.
    pub fn overrides(&self) -> Result<Vec<(String, String)>, ConfigError> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: 0,
                text: s.clone(),
            })?;
            pairs.push((k.trim().into(), v.trim().into()));
        }
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.retain(|(x, _)| x != k);
                pairs.push((k.into(), v));
            }
        };
        put("run.mode", self.mode.map(config::mode_name));
        put("run.seed", self.seed.map(|x| x.to_string()));
        put("chain.total_length_km", self.distance_km.map(|x| x.to_string()));
        put("chain.n_repeaters", self.n_rep.map(|x| x.to_string()));
        put("chain.n_trb", self.n_trb.map(|x| x.to_string()));
        put("chain.epsilon", self.epsilon.map(|x| x.to_string()));
        put("chain.t_cut_s", self.t_cut_s.map(|x| x.to_string()));
        put("chain.trials", self.trials.map(|x| x.to_string()));
        put("chain.successes", self.successes.map(|x| x.to_string()));
        put("run.out_dir", self.out.as_ref().map(|p| p.display().to_string()));
        put("run.event_log", self.event_log.then(|| "true".into()));
        Ok(pairs)
    }

    /// Defaults, then the file, then the flags.
    pub fn manifest(&self) -> Result<RunManifest, ConfigError> {
        let mut m = match &self.config {
            Some(p) => parse_config(p)?,
            None => RunManifest::default(),
        };
        m.apply(&self.overrides()?)?;
        m.validate()?;
        Ok(m)
    }
}
