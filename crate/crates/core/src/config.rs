//! Flat `key = value` run configuration with per-dataset defaults.
//!
//! A resolved configuration is layered as preset ← file ← overrides, and the
//! same text format doubles as the run manifest: feeding a manifest back in
//! reproduces the run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{load_citation, load_elliptic, GraphDataset, SplitSizes};
use crate::error::{Error, Result};
use crate::synthetic::PlantedPartition;
use crate::train::{AdamConfig, InductiveConfig, InductiveProtocol, SweepConfig, TrainConfig, Variant};

pub type KeyValues = BTreeMap<String, String>;

/// Parses `key = value` lines. `#` starts a comment line; repeated keys are an error.
pub fn parse_key_values(text: &str, path: &Path) -> Result<KeyValues> {
    let mut map = KeyValues::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(err("empty key".into()));
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(err(format!("duplicate key {k}")));
        }
    }
    Ok(map)
}

pub fn render_key_values(map: &KeyValues) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Sweep,
    Inductive,
}

pub const DATASETS: [&str; 5] = ["cora", "citeseer", "pubmed", "elliptic", "synthetic"];

/// Default split sizes (train/validation/test/support) per dataset.
pub fn split_sizes(dataset: &str) -> Option<SplitSizes> {
    let (train, validation, test, support) = match dataset {
        "cora" => (140, 140, 273, 2155),
        "citeseer" => (120, 120, 332, 2740),
        "pubmed" => (60, 60, 1973, 17624),
        "elliptic" => (4656, 4656, 9314, 27938),
        "synthetic" => (40, 40, 200, 320),
        _ => return None,
    };
    Some(SplitSizes {
        train,
        validation,
        test,
        support,
    })
}

/// Every key a run understands, with its default for `dataset` and `command`.
pub fn preset(dataset: &str, command: Command) -> Result<KeyValues> {
    let sizes = split_sizes(dataset)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown dataset {dataset:?}; expected one of {DATASETS:?}")))?;
    let elliptic = dataset == "elliptic";
    let inductive = command == Command::Inductive;
    let mut m = KeyValues::new();
    let mut set = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    set("dataset", dataset.into());
    set("data_dir", String::new());
    set("model", "label-gcn".into());
    set("hidden_dim", if elliptic { "100" } else { "16" }.into());
    set("dropout", "0.5".into());
    set("learning_rate", if inductive { "0.001" } else { "0.01" }.into());
    set("max_epochs", if inductive { "1000" } else { "300" }.into());
    set(
        "patience",
        if inductive {
            "none".into()
        } else if elliptic {
            "30".into()
        } else {
            "10".into()
        },
    );
    set("oversample_factor", if inductive { "6" } else { "1" }.into());
    set("train_size", sizes.train.to_string());
    set("validation_size", sizes.validation.to_string());
    set("test_size", sizes.test.to_string());
    set("support_size", sizes.support.to_string());
    set("support_fraction", "1".into());
    set("support_fractions", "0,0.25,0.62,1".into());
    set("n_splits", if elliptic { "10" } else { "20" }.into());
    set("n_inits", if inductive { "5" } else if elliptic { "3" } else { "5" }.into());
    set("baseline", "false".into());
    set("seed", "0".into());
    set("jobs", "1".into());
    set("row_normalize", "false".into());
    set("train_until", "34".into());
    set("last_step", "49".into());
    set("shutdown_step", "43".into());
    set("inductive_protocol", "hide-step".into());
    set("synthetic_nodes", "600".into());
    Ok(m)
}

/// Overlays `layer` on `base`, rejecting keys the preset does not define.
pub fn overlay(base: &mut KeyValues, layer: &KeyValues) -> Result<()> {
    for (k, v) in layer {
        match base.get_mut(k) {
            Some(slot) => *slot = v.clone(),
            None => return Err(Error::InvalidArgument(format!("unknown config key {k:?}"))),
        }
    }
    Ok(())
}

/// Fully typed run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: String,
    pub data_dir: Option<PathBuf>,
    pub variant: Variant,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub train: TrainConfig,
    pub sizes: SplitSizes,
    pub support_fraction: f64,
    pub support_fractions: Vec<f64>,
    pub n_splits: usize,
    pub n_inits: usize,
    pub baseline: bool,
    pub seed: u64,
    pub jobs: usize,
    pub row_normalize: bool,
    pub train_until: u32,
    pub last_step: u32,
    pub shutdown_step: u32,
    pub inductive_protocol: InductiveProtocol,
    pub synthetic_nodes: usize,
}

fn get<'a>(map: &'a KeyValues, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::InvalidArgument(format!("missing config key {key:?}")))
}

fn typed<T: FromStr>(map: &KeyValues, key: &str) -> Result<T>
where
    T::Err: Display,
{
    let raw = get(map, key)?;
    raw.parse()
        .map_err(|e| Error::InvalidArgument(format!("config key {key} = {raw:?}: {e}")))
}

impl RunConfig {
    /// Resolves preset ← file ← overrides into typed settings. The dataset name
    /// is taken from the overrides first, then the file.
    pub fn resolve(command: Command, file: &KeyValues, overrides: &KeyValues) -> Result<(Self, KeyValues)> {
        let dataset = overrides
            .get("dataset")
            .or_else(|| file.get("dataset"))
            .ok_or_else(|| Error::InvalidArgument("no dataset given".into()))?;
        let mut map = preset(dataset, command)?;
        overlay(&mut map, file)?;
        overlay(&mut map, overrides)?;
        let config = Self::from_map(&map)?;
        Ok((config, map))
    }

    pub fn from_map(map: &KeyValues) -> Result<Self> {
        let patience = match get(map, "patience")? {
            "none" | "off" | "0" => None,
            _ => Some(typed(map, "patience")?),
        };
        let fractions = get(map, "support_fractions")?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("support_fractions entry {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let data_dir = get(map, "data_dir")?;
        let config = Self {
            dataset: get(map, "dataset")?.to_string(),
            data_dir: (!data_dir.is_empty()).then(|| PathBuf::from(data_dir)),
            variant: Variant::parse(get(map, "model")?)?,
            hidden_dim: typed(map, "hidden_dim")?,
            dropout: typed(map, "dropout")?,
            train: TrainConfig {
                adam: AdamConfig {
                    learning_rate: typed(map, "learning_rate")?,
                    ..Default::default()
                },
                max_epochs: typed(map, "max_epochs")?,
                patience,
                oversample_factor: typed(map, "oversample_factor")?,
            },
            sizes: SplitSizes {
                train: typed(map, "train_size")?,
                validation: typed(map, "validation_size")?,
                test: typed(map, "test_size")?,
                support: typed(map, "support_size")?,
            },
            support_fraction: typed(map, "support_fraction")?,
            support_fractions: fractions,
            n_splits: typed(map, "n_splits")?,
            n_inits: typed(map, "n_inits")?,
            baseline: typed(map, "baseline")?,
            seed: typed(map, "seed")?,
            jobs: typed(map, "jobs")?,
            row_normalize: typed(map, "row_normalize")?,
            train_until: typed(map, "train_until")?,
            last_step: typed(map, "last_step")?,
            shutdown_step: typed(map, "shutdown_step")?,
            inductive_protocol: InductiveProtocol::parse(get(map, "inductive_protocol")?)?,
            synthetic_nodes: typed(map, "synthetic_nodes")?,
        };
        config.train.validate()?;
        if config.hidden_dim == 0 {
            return Err(Error::InvalidArgument("hidden_dim must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", config.dropout)));
        }
        Ok(config)
    }

    /// Loads the dataset from `data_dir` using the standard file layout, or
    /// generates it for `synthetic`.
    pub fn load_dataset(&self) -> Result<GraphDataset> {
        let ds = if self.dataset == "synthetic" {
            PlantedPartition {
                n: self.synthetic_nodes,
                ..Default::default()
            }
            .generate(self.seed)?
        } else {
            let dir = self
                .data_dir
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument(format!("dataset {} needs data_dir", self.dataset)))?;
            let paths = dataset_paths(&self.dataset, dir)?;
            if let Some(p) = paths.iter().find(|p| !p.exists()) {
                return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
            }
            if self.dataset == "elliptic" {
                load_elliptic(&paths[0], &paths[1], &paths[2])?
            } else {
                load_citation(&paths[0], &paths[1])?.dataset
            }
        };
        Ok(if self.row_normalize { ds.row_normalized() } else { ds })
    }

    pub fn sweep_config(&self) -> SweepConfig {
        let mut variants = Vec::new();
        if self.baseline {
            variants.push(Variant::Gcn);
        }
        variants.push(Variant::LabelGcn);
        SweepConfig {
            sizes: self.sizes,
            support_fractions: self.support_fractions.clone(),
            n_splits: self.n_splits,
            n_inits: self.n_inits,
            seed: self.seed,
            hidden_dim: self.hidden_dim,
            dropout_rate: self.dropout,
            train: self.train,
            variants,
            jobs: self.jobs,
        }
    }

    pub fn inductive_config(&self) -> InductiveConfig {
        InductiveConfig {
            train_until: self.train_until,
            last_step: self.last_step,
            shutdown_step: self.shutdown_step,
            hidden_dim: self.hidden_dim,
            dropout_rate: self.dropout,
            train: self.train,
            n_inits: self.n_inits,
            seed: self.seed,
            variants: vec![Variant::Gcn, Variant::LabelGcn],
            protocol: self.inductive_protocol,
            jobs: self.jobs,
        }
    }
}

/// Files expected under `dir` for a named dataset.
pub fn dataset_paths(dataset: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(match dataset {
        "cora" | "citeseer" | "pubmed" => vec![
            dir.join(dataset).join(format!("{dataset}.content")),
            dir.join(dataset).join(format!("{dataset}.cites")),
        ],
        "elliptic" => ["features", "classes", "edgelist"]
            .iter()
            .map(|f| dir.join("elliptic").join(format!("elliptic_txs_{f}.csv")))
            .collect(),
        other => return Err(Error::InvalidArgument(format!("dataset {other:?} has no files"))),
    })
}

/// Manifest text: the resolved configuration plus provenance comments.
pub fn manifest(command: &str, map: &KeyValues) -> String {
    format!(
        "# labelgcn {} manifest\n# command = {command}\n{}",
        env!("CARGO_PKG_VERSION"),
        render_key_values(map)
    )
}
