//! Flat `key = value` configuration with dotted namespaces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hyrep::chain::ChainConfig;
use hyrep::emitter::{DriveTemplate, EmitterParams};
use hyrep::linklayer::DetectorCount;
use hyrep::SweepGrid;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Emitter,
    Link,
    #[default]
    Chain,
    Sweep,
    Heatmap,
}

/// Where the elementary pair state of the chain comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    /// Fixed reference matrix.
    #[default]
    Reference,
    /// Computed by the emitter pair model before the run.
    Model,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub mode: Mode,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub event_log: bool,
    pub chain: ChainConfig,
    pub pair_source: PairSource,
    pub emitter: EmitterParams,
    pub drive: DriveTemplate,
    /// Re-balance the pause before using the drive.
    pub calibrate: bool,
    pub pair_samples: usize,
    pub scan_points: usize,
    pub scan_range: (f64, f64),
    pub grid: SweepGrid,
}

impl Default for RunManifest {
    fn default() -> Self {
        let chain = ChainConfig::default();
        RunManifest {
            config_path: None,
            mode: Mode::default(),
            seed: chain.seed,
            out_dir: PathBuf::from("out"),
            event_log: false,
            grid: SweepGrid {
                distances: vec![100.0, 200.0, 400.0, 600.0, 800.0, 1000.0],
                repeater_counts: (0..=9).collect(),
                cutoffs: vec![chain.cutoff],
                epsilons: vec![1e-3, 1e-2],
                n_transfer_rb: vec![1, 2, 4],
            },
            chain,
            pair_source: PairSource::default(),
            emitter: EmitterParams::default(),
            drive: DriveTemplate::default(),
            calibrate: true,
            pair_samples: 0,
            scan_points: 0,
            scan_range: (-3.0e9, 3.0e9),
        }
    }
}

/// Text form of a configuration value; `show` output always parses back to
/// the same value.
trait Value: Sized {
    fn show(&self) -> String;
    fn read(s: &str) -> Result<Self, String>;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn show(&self) -> String {
                self.to_string()
            }
            fn read(s: &str) -> Result<Self, String> {
                s.parse().map_err(|e| format!("`{s}`: {e}"))
            }
        }
    )*};
}
plain_value!(f64, u32, u64, usize, bool);

impl Value for PathBuf {
    fn show(&self) -> String {
        self.display().to_string()
    }
    fn read(s: &str) -> Result<Self, String> {
        Ok(PathBuf::from(s))
    }
}

impl<T: Value> Value for Vec<T> {
    fn show(&self) -> String {
        self.iter().map(Value::show).collect::<Vec<_>>().join(",")
    }
    fn read(s: &str) -> Result<Self, String> {
        s.split(',').map(|x| T::read(x.trim())).collect()
    }
}

impl Value for Option<u64> {
    fn show(&self) -> String {
        self.map_or_else(|| "auto".into(), |n| n.to_string())
    }
    fn read(s: &str) -> Result<Self, String> {
        if s == "auto" {
            Ok(None)
        } else {
            u64::read(s).map(Some)
        }
    }
}

impl Value for Mode {
    fn show(&self) -> String {
        clap::ValueEnum::to_possible_value(self)
            .map(|v| v.get_name().to_string())
            .unwrap_or_default()
    }
    fn read(s: &str) -> Result<Self, String> {
        <Mode as clap::ValueEnum>::from_str(s, false)
    }
}

impl Value for DetectorCount {
    fn show(&self) -> String {
        match self {
            DetectorCount::Single => "single".into(),
            DetectorCount::Double => "double".into(),
        }
    }
    fn read(s: &str) -> Result<Self, String> {
        match s {
            "single" => Ok(DetectorCount::Single),
            "double" => Ok(DetectorCount::Double),
            _ => Err(format!("`{s}` is not one of single, double")),
        }
    }
}

impl Value for PairSource {
    fn show(&self) -> String {
        match self {
            PairSource::Reference => "reference".into(),
            PairSource::Model => "model".into(),
        }
    }
    fn read(s: &str) -> Result<Self, String> {
        match s {
            "reference" => Ok(PairSource::Reference),
            "model" => Ok(PairSource::Model),
            _ => Err(format!("`{s}` is not one of reference, model")),
        }
    }
}

pub fn mode_name(m: Mode) -> String {
    m.show()
}

struct Key {
    name: &'static str,
    help: &'static str,
    get: fn(&RunManifest) -> String,
    set: fn(&mut RunManifest, &str) -> Result<(), String>,
}

macro_rules! key {
    ($name:literal, $help:literal, $($f:tt)+) => {
        Key {
            name: $name,
            help: $help,
            get: |m| Value::show(&m.$($f)+),
            set: |m, v| {
                m.$($f)+ = Value::read(v)?;
                Ok(())
            },
        }
    };
}

fn keys() -> Vec<Key> {
    vec![
        key!("run.mode", "emitter, link, chain, sweep or heatmap", mode),
        key!("run.seed", "base seed of every random stream", seed),
        key!("run.out_dir", "output directory", out_dir),
        key!("run.event_log", "write events.jsonl for the first chain trial", event_log),
        key!("chain.total_length_km", "end-to-end distance", chain.total_length),
        key!("chain.n_repeaters", "repeater nodes between the end nodes", chain.n_repeaters),
        key!("chain.n_trb", "transducers per repeater side", chain.n_transfer_rb),
        key!("chain.epsilon", "depolarizing error per swap", chain.swap_error),
        key!("chain.swap_success", "swap success probability", chain.swap_success),
        key!("chain.swap_time_s", "swap duration", chain.swap_time),
        key!("chain.transfer_success", "memory to transducer transfer probability", chain.transfer_success),
        key!("chain.spin_coherence_s", "transducer spin coherence time", chain.spin_coherence),
        key!("chain.t_cut_s", "cutoff time", chain.cutoff),
        key!("chain.successes", "end-to-end successes per trial", chain.successes_per_trial),
        key!("chain.trials", "independent trials", chain.n_trials),
        key!("chain.event_budget", "event cap per trial", chain.event_budget),
        key!("chain.pair_source", "reference or model", pair_source),
        key!("link.attenuation_db_per_km", "fiber loss", chain.link.attenuation),
        key!("link.light_speed_km_per_s", "speed of light in fiber", chain.link.light_speed),
        key!("link.repetition_rate_hz", "attempt rate", chain.link.repetition_rate),
        key!("link.detector_efficiency", "midpoint detector efficiency", chain.link.detector_efficiency),
        key!("link.detector_count", "single or double click heralding", chain.link.detector_count),
        key!("link.pair_success", "elementary pair success probability", chain.link.pair_success),
        key!("link.memory_t2_s", "ensemble memory coherence time", chain.link.memory_t2),
        key!("link.n_modes", "memory modes per segment, or auto", chain.link.n_modes),
        key!("emitter.delta_hz", "first laser detuning", emitter.delta),
        key!("emitter.omega1_hz", "first laser Rabi frequency", emitter.omega1),
        key!("emitter.omega2_hz", "second laser Rabi frequency", emitter.omega2),
        key!("emitter.delta7_hz", "hyperfine splitting", emitter.delta7),
        key!("emitter.delta8_hz", "hyperfine splitting", emitter.delta8),
        key!("emitter.delta10_hz", "hyperfine splitting", emitter.delta10),
        key!("emitter.delta11_hz", "hyperfine splitting", emitter.delta11),
        key!("emitter.delta13_hz", "hyperfine splitting", emitter.delta13),
        key!("emitter.delta15_hz", "ground hyperfine splitting", emitter.delta15),
        key!("emitter.gamma2", "decay rate, angular", emitter.gamma2),
        key!("emitter.gamma3a", "decay rate, angular", emitter.gamma3a),
        key!("emitter.gamma3b", "decay rate, angular", emitter.gamma3b),
        key!("emitter.gamma4", "decay rate, angular", emitter.gamma4),
        key!("emitter.kappa_t", "telecom cavity leak rate, angular", emitter.kappa_t),
        key!("emitter.kappa_o", "visible cavity leak rate, angular", emitter.kappa_o),
        key!("emitter.coop_t_mean", "telecom cooperativity mean", emitter.coop_t.mean),
        key!("emitter.coop_t_std", "telecom cooperativity std", emitter.coop_t.std),
        key!("emitter.coop_o_mean", "visible cooperativity mean", emitter.coop_o.mean),
        key!("emitter.coop_o_std", "visible cooperativity std", emitter.coop_o.std),
        key!("emitter.purity_laser1", "first laser polarization purity", emitter.purity[0]),
        key!("emitter.purity_laser2", "second laser polarization purity", emitter.purity[1]),
        key!("emitter.purity_telecom", "telecom cavity polarization purity", emitter.purity[2]),
        key!("emitter.purity_visible", "visible cavity polarization purity", emitter.purity[3]),
        key!("emitter.calibrate", "balance the pause before running", calibrate),
        key!("emitter.pair_samples", "pair model samples in emitter mode, 0 to skip", pair_samples),
        key!("emitter.scan_points", "detuning scan points in emitter mode, 0 to skip", scan_points),
        key!("emitter.scan_min_hz", "lower end of the detuning scan", scan_range.0),
        key!("emitter.scan_max_hz", "upper end of the detuning scan", scan_range.1),
        key!("drive.amplitude_hz", "early pulse amplitude", drive.amplitude),
        key!("drive.late_amplitude_hz", "late pulse amplitude", drive.late_amplitude),
        key!("drive.pause_start_s", "end of the early pulse", drive.pause_start),
        key!("drive.pause_length_s", "gap between the pulses", drive.pause_length),
        key!("drive.late_length_s", "late pulse length", drive.late_length),
        key!("drive.duration_s", "emission window", drive.duration),
        key!("sweep.distances_km", "comma list", grid.distances),
        key!("sweep.n_rep", "comma list", grid.repeater_counts),
        key!("sweep.t_cut_s", "comma list", grid.cutoffs),
        key!("sweep.epsilon", "comma list", grid.epsilons),
        key!("sweep.n_trb", "comma list", grid.n_transfer_rb),
    ]
}

/// Every recognized key with a one-line description.
pub fn key_help() -> Vec<(&'static str, &'static str)> {
    keys().into_iter().map(|k| (k.name, k.help)).collect()
}

/// Splits a document into `(key, value)` pairs in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunManifest {
    /// Applies `pairs` on top of the current values. Keys may repeat across
    /// calls (later layers win) but not within one call.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<(), ConfigError> {
        let table = keys();
        let mut seen = BTreeMap::new();
        for (k, v) in pairs {
            if seen.insert(k.as_str(), ()).is_some() {
                return Err(ConfigError::Duplicate(k.clone()));
            }
            let key = table
                .iter()
                .find(|x| x.name == k)
                .ok_or_else(|| ConfigError::UnknownKey(k.clone()))?;
            (key.set)(self, v).map_err(|msg| ConfigError::Value {
                key: k.clone(),
                msg,
            })?;
        }
        self.chain.seed = self.seed;
        Ok(())
    }

    /// Checks every module invariant the run will rely on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        if !(self.chain.total_length > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "chain.total_length_km = {} violates > 0",
                self.chain.total_length
            )));
        }
        self.chain.validate().map_err(|e| bad(&e))?;
        self.emitter.validate().map_err(|e| bad(&e))?;
        self.drive.profile().map_err(|e| bad(&e))?;
        self.grid.validate().map_err(|e| bad(&e))?;
        if self.scan_points > 0 && !(self.scan_range.1 > self.scan_range.0) {
            return Err(ConfigError::Invalid(
                "emitter.scan_max_hz must exceed emitter.scan_min_hz".into(),
            ));
        }
        Ok(())
    }

    /// Canonical document listing every key, each followed by its value.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        for k in keys() {
            let _ = writeln!(s, "{} = {}", k.name, (k.get)(self));
        }
        s
    }

    /// Resolved values by key.
    pub fn values(&self) -> BTreeMap<&'static str, String> {
        keys().into_iter().map(|k| (k.name, (k.get)(self))).collect()
    }

    /// SHA-256 of the canonical document without the output directory, so
    /// the same run written elsewhere carries the same stamp.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        for line in self.emit().lines().filter(|l| !l.starts_with("run.out_dir")) {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Resolves `text` on top of the defaults.
pub fn parse_config_str(text: &str, path: Option<PathBuf>) -> Result<RunManifest, ConfigError> {
    let mut m = RunManifest {
        config_path: path,
        ..RunManifest::default()
    };
    m.apply(&parse_pairs(text)?)?;
    m.validate()?;
    Ok(m)
}

pub fn parse_config(path: &Path) -> Result<RunManifest, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, Some(path.to_path_buf()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let m = parse_config_str("", None).unwrap();
        assert_eq!(m, RunManifest::default());
        let c = &m.chain;
        assert_eq!(c.link.repetition_rate, 1e6);
        assert_eq!(c.link.attenuation, 0.2);
        assert_eq!(c.link.detector_efficiency, 0.99);
        assert_eq!(c.link.memory_t2, 2.6e-3);
        assert_eq!((c.transfer_success, c.swap_success, c.swap_time), (0.95, 0.92, 2e-7));
        assert_eq!((c.spin_coherence, c.cutoff), (1.0, 1e-2));
    }

    #[test]
    fn override_and_errors() {
        let m = parse_config_str("chain.epsilon = 0.001 # low noise\n", None).unwrap();
        assert_eq!(m.chain.swap_error, 1e-3);
        let e = parse_config_str("chain.total_length_km = -5", None).unwrap_err();
        assert!(e.to_string().contains("total_length_km"), "{e}");
        let e = parse_config_str("chain.lenght = 5", None).unwrap_err();
        assert!(e.to_string().contains("chain.lenght"), "{e}");
        assert!(parse_config_str("chain.trials = many", None).is_err());
        assert!(parse_config_str("just words", None).is_err());
        assert!(parse_config_str("run.seed = 1\nrun.seed = 2", None).is_err());
    }

    #[test]
    fn emit_round_trips() {
        let mut m = RunManifest::default();
        m.apply(&parse_pairs(
            "sweep.n_rep = 0,3\nlink.n_modes = 40\nchain.t_cut_s = 0.0123456789\nrun.mode = heatmap\nlink.detector_count = single",
        ).unwrap())
        .unwrap();
        let back = parse_config_str(&m.emit(), None).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.config_hash(), m.config_hash());
    }

    #[test]
    fn hash_ignores_output_directory_only() {
        let a = RunManifest::default();
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 99;
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
