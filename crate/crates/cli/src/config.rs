//! Run configuration: per-dataset profiles and the flat `key = value` file
//! format.
//!
//! Precedence, lowest first: dataset profile, config file, `LTLP_OUT`,
//! command-line flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ltlp_core::dataset::synthetic::SbmConfig;
use ltlp_core::dataset::SplitConfig;
use ltlp_core::encoder::{Decoder, EncoderConfig};
use ltlp_core::sem::{DiscardDirection, HardNegativeConfig};
use ltlp_core::sem::FilterConfig;
use ltlp_core::trainer::{CenterUpdate, TrainConfig};
use serde::Serialize;
use thiserror::Error;

pub const OUT_ENV: &str = "LTLP_OUT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("bad value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Hyperparameters that differ between the named benchmark datasets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Profile {
    pub k_percent: f64,
    pub varphi: f64,
    pub epochs_pretrain: usize,
    pub epochs_continue: usize,
    pub batch_size: usize,
}

const PROFILES: &[(&str, Profile)] = &[
    ("cora", Profile { k_percent: 0.6, varphi: 0.7, epochs_pretrain: 120, epochs_continue: 50, batch_size: 1024 }),
    ("citeseer", Profile { k_percent: 0.4, varphi: 0.6, epochs_pretrain: 120, epochs_continue: 70, batch_size: 1024 }),
    ("pubmed", Profile { k_percent: 0.8, varphi: 0.2, epochs_pretrain: 60, epochs_continue: 60, batch_size: 1024 }),
    ("ogb-collab", Profile { k_percent: 0.6, varphi: 0.6, epochs_pretrain: 100, epochs_continue: 30, batch_size: 1024 }),
    ("ogb-ppa", Profile { k_percent: 0.4, varphi: 0.2, epochs_pretrain: 100, epochs_continue: 50, batch_size: 1024 }),
];

/// Profile for a dataset name. `cora-like` and unknown names use Cora's.
pub fn profile_for(dataset: &str) -> Profile {
    let name = dataset.to_ascii_lowercase().replace('_', "-");
    PROFILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, p)| *p)
        .unwrap_or(PROFILES[0].1)
}

/// Validation-selected or fixed acceptance threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TauChoice {
    Validation,
    Fixed(f64),
}

impl fmt::Display for TauChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauChoice::Validation => write!(f, "auto"),
            TauChoice::Fixed(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    /// Dataset name (`cora`, `sbm`, `cora-like`, ...) or a path to an edge list.
    pub dataset: String,
    pub data_dir: PathBuf,
    /// Explicit feature file for edge-list datasets.
    pub features: Option<PathBuf>,
    pub normalize_features: bool,
    pub seeds: Vec<u64>,
    pub split: SplitConfig,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub k_percent: f64,
    pub tau: TauChoice,
    pub tail_only: bool,
    pub hits_k: Vec<usize>,
    pub sbm: SbmConfig,
    pub hard_negative: HardNegativeConfig,
    pub sparsity_ratios: Vec<f64>,
    /// Also train a cross-entropy-only continuation for comparison.
    pub resumed_baseline: bool,
    pub out: PathBuf,
}

impl RunConfig {
    /// Defaults for `dataset`, with its profile applied.
    pub fn for_dataset(dataset: &str) -> RunConfig {
        let p = profile_for(dataset);
        RunConfig {
            dataset: dataset.to_string(),
            data_dir: PathBuf::from("data"),
            features: None,
            normalize_features: true,
            seeds: vec![0],
            split: SplitConfig::default(),
            encoder: EncoderConfig::default(),
            train: TrainConfig {
                epochs_pretrain: p.epochs_pretrain,
                epochs_continue: p.epochs_continue,
                varphi: p.varphi,
                batch_size: p.batch_size,
                ..TrainConfig::default()
            },
            k_percent: p.k_percent,
            tau: TauChoice::Validation,
            tail_only: false,
            hits_k: vec![20, 50, 100],
            sbm: SbmConfig::default(),
            hard_negative: HardNegativeConfig::default(),
            sparsity_ratios: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            resumed_baseline: false,
            out: PathBuf::from("runs"),
        }
    }

    /// Parses a config file. `dataset_override` wins over the file's
    /// `dataset` key when choosing the profile.
    pub fn from_file(path: &Path, dataset_override: Option<&str>) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        RunConfig::from_str_with(&text, dataset_override)
    }

    pub fn from_str_with(text: &str, dataset_override: Option<&str>) -> Result<RunConfig, ConfigError> {
        let entries = parse_entries(text)?;
        let dataset = dataset_override
            .map(str::to_string)
            .or_else(|| entries.iter().find(|e| e.key == "dataset").map(|e| e.value.clone()))
            .unwrap_or_else(|| "cora".to_string());
        let mut cfg = RunConfig::for_dataset(&dataset);
        for e in &entries {
            if e.key == "dataset" {
                continue;
            }
            cfg.set(&e.key, &e.value).map_err(|err| match err {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: e.line, key },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = v.to_string(),
            "data_dir" => self.data_dir = PathBuf::from(v),
            "features" => self.features = Some(PathBuf::from(v)),
            "normalize_features" => self.normalize_features = parse(key, v)?,
            "seed" => self.seeds = vec![parse(key, v)?],
            "seeds" => self.seeds = parse_list(key, v)?,
            "train_frac" => self.split.train_frac = parse(key, v)?,
            "val_frac" => self.split.val_frac = parse(key, v)?,
            "neg_ratio" => self.split.neg_ratio = parse(key, v)?,
            "layers" => self.encoder.layers = parse(key, v)?,
            "hidden" => self.encoder.hidden = parse(key, v)?,
            "decoder" => self.encoder.decoder = parse::<Decoder>(key, v)?,
            "lr" => self.train.lr = parse(key, v)?,
            "epochs_pretrain" => self.train.epochs_pretrain = parse(key, v)?,
            "epochs_continue" => self.train.epochs_continue = parse(key, v)?,
            "varphi" => self.train.varphi = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "log_val_auc" => self.train.log_val_auc = parse(key, v)?,
            "center_update" => {
                self.train.center_update = match v {
                    "optimizer" => CenterUpdate::Optimizer,
                    "ema" => CenterUpdate::Ema { decay: 0.9 },
                    _ => return Err(bad(key, v, "expected `optimizer` or `ema`")),
                }
            }
            "center_decay" => match &mut self.train.center_update {
                CenterUpdate::Ema { decay } => *decay = parse(key, v)?,
                CenterUpdate::Optimizer => return Err(bad(key, v, "set `center_update = ema` first")),
            },
            "k_percent" => self.k_percent = parse(key, v)?,
            "tau" => {
                self.tau = if v == "auto" { TauChoice::Validation } else { TauChoice::Fixed(parse(key, v)?) }
            }
            "tail_only" => self.tail_only = parse(key, v)?,
            "hits_k" => self.hits_k = parse_list(key, v)?,
            "sbm_blocks" => self.sbm.num_blocks = parse(key, v)?,
            "sbm_block_size" => self.sbm.block_size = parse(key, v)?,
            "sbm_p_in" => self.sbm.p_in = parse(key, v)?,
            "sbm_p_out" => self.sbm.p_out = parse(key, v)?,
            "sbm_feature_dim" => self.sbm.feature_dim = parse(key, v)?,
            "sbm_noise" => self.sbm.noise_std = parse(key, v)?,
            "hn_levels" => self.hard_negative.levels = parse_list(key, v)?,
            "hn_discard_fraction" => self.hard_negative.discard_fraction = parse(key, v)?,
            "hn_discard" => {
                self.hard_negative.direction = match v {
                    "lowest" => DiscardDirection::Lowest,
                    "highest" => DiscardDirection::Highest,
                    _ => return Err(bad(key, v, "expected `lowest` or `highest`")),
                }
            }
            "hn_tau" => self.hard_negative.tau = if v == "auto" { None } else { Some(parse(key, v)?) },
            "sparsity_ratios" => self.sparsity_ratios = parse_list(key, v)?,
            "resumed_baseline" => self.resumed_baseline = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.to_string() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: ltlp_core::Error| ConfigError::Invalid(e.to_string());
        self.split.validate().map_err(invalid)?;
        self.train.validate().map_err(invalid)?;
        if self.encoder.layers == 0 || self.encoder.hidden == 0 {
            return Err(ConfigError::Invalid("layers and hidden must be positive".into()));
        }
        let tau = match self.tau {
            TauChoice::Fixed(t) => t,
            TauChoice::Validation => 0.5,
        };
        FilterConfig { tau, k_percent: self.k_percent, tail_only: self.tail_only }
            .validate()
            .map_err(invalid)?;
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("seed list is empty".into()));
        }
        if self.hits_k.contains(&0) {
            return Err(ConfigError::Invalid("hits_k entries must be positive".into()));
        }
        if let Some(r) = self.sparsity_ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(ConfigError::Invalid(format!("sparsity ratio {r} outside (0, 1]")));
        }
        Ok(())
    }

    /// Applies `LTLP_OUT` when set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUT_ENV).filter(|d| !d.is_empty()) {
            self.out = PathBuf::from(dir);
        }
    }

    /// Per-seed copies of the split, training and encoder settings.
    pub fn seeded(&self, seed: u64) -> RunConfig {
        let mut cfg = self.clone();
        cfg.seeds = vec![seed];
        cfg.split.seed = seed;
        cfg.train.seed = seed;
        cfg.encoder.init_seed = seed;
        cfg.sbm.seed = seed;
        cfg.hard_negative.seed = seed;
        cfg
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.out.join(format!("seed-{seed}"))
    }
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::Duplicate { line, key: key.to_string() });
        }
        entries.push(Entry { line, key: key.to_string(), value: value.trim().to_string() });
    }
    Ok(entries)
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.to_string(), value: value.to_string(), reason: reason.into() }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e.to_string()))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_follow_the_table() {
        let c = RunConfig::for_dataset("citeseer");
        assert_eq!((c.k_percent, c.train.varphi), (0.4, 0.6));
        assert_eq!((c.train.epochs_pretrain, c.train.epochs_continue), (120, 70));
        let p = RunConfig::for_dataset("PubMed");
        assert_eq!((p.k_percent, p.train.varphi, p.train.epochs_pretrain), (0.8, 0.2, 60));
        assert_eq!(profile_for("ogb_collab").epochs_continue, 30);
        assert_eq!(profile_for("mystery"), profile_for("cora"));
        assert_eq!(profile_for("cora-like"), profile_for("cora"));
    }

    #[test]
    fn file_overrides_profile() {
        let cfg = RunConfig::from_str_with("dataset = pubmed\n# comment\nk_percent = 0.5 # inline\nseeds = 1, 2,3\n", None).unwrap();
        assert_eq!(cfg.k_percent, 0.5);
        assert_eq!(cfg.train.varphi, 0.2);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
    }

    #[test]
    fn flag_dataset_selects_profile() {
        let cfg = RunConfig::from_str_with("dataset = pubmed\n", Some("citeseer")).unwrap();
        assert_eq!(cfg.dataset, "citeseer");
        assert_eq!(cfg.train.epochs_continue, 70);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(matches!(
            RunConfig::from_str_with("learning_rate = 0.1\n", None),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::from_str_with("lr = 0.1\nlr = 0.2\n", None),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(RunConfig::from_str_with("just words\n", None), Err(ConfigError::Syntax { line: 1 })));
    }

    #[test]
    fn values_are_validated() {
        assert!(matches!(RunConfig::from_str_with("lr = fast\n", None), Err(ConfigError::Value { .. })));
        assert!(matches!(RunConfig::from_str_with("k_percent = 1.5\n", None), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::from_str_with("tau = 2\n", None), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::from_str_with("sparsity_ratios = 0.5, 0\n", None), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::from_str_with("center_decay = 0.5\n", None), Err(ConfigError::Value { .. })));
        let ema = RunConfig::from_str_with("center_update = ema\ncenter_decay = 0.5\n", None).unwrap();
        assert_eq!(ema.train.center_update, CenterUpdate::Ema { decay: 0.5 });
    }

    #[test]
    fn tau_accepts_auto_or_number() {
        assert_eq!(RunConfig::from_str_with("tau = auto\n", None).unwrap().tau, TauChoice::Validation);
        assert_eq!(RunConfig::from_str_with("tau = 1.0\n", None).unwrap().tau, TauChoice::Fixed(1.0));
    }

    #[test]
    fn seeded_propagates_the_seed() {
        let c = RunConfig::for_dataset("cora").seeded(7);
        assert_eq!((c.split.seed, c.train.seed, c.encoder.init_seed, c.sbm.seed), (7, 7, 7, 7));
        assert!(c.seed_dir(7).ends_with("seed-7"));
    }
}
