use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, evaluate, train, EvalMetrics, Seeds, TrainConfig, TrialInputs};
use crate::data::{build_input, features_only, sample_split, visibility_for_phase, GraphDataset, Phase, SplitSizes, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{summarize, Summary};
use crate::model::{GraphInput, ModelConfig};
use crate::sparse::{normalize_adjacency, NormalizedAdjacency};

/// Largest share of aborted trials a sweep tolerates.
pub const MAX_ABORT_FRACTION: f64 = 0.05;

const STREAM_SPLIT: u64 = 1;
const STREAM_SUPPORT: u64 = 2;
const STREAM_INIT: u64 = 3;
const STREAM_DROPOUT: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Gcn,
    LabelGcn,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Gcn => "gcn",
            Variant::LabelGcn => "label-gcn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Variant::Gcn),
            "label-gcn" => Ok(Variant::LabelGcn),
            other => Err(Error::InvalidArgument(format!("unknown model variant {other:?}"))),
        }
    }

    pub fn model_config(self, dataset: &GraphDataset, hidden_dim: usize, dropout_rate: f64) -> ModelConfig {
        let label = self == Variant::LabelGcn;
        ModelConfig {
            input_dim: dataset.d() + if label { dataset.label_cols() } else { 0 },
            hidden_dim,
            n_classes: dataset.n_classes(),
            dropout_rate,
            masked_first_layer: label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sizes: SplitSizes,
    pub support_fractions: Vec<f64>,
    pub n_splits: usize,
    pub n_inits: usize,
    pub seed: u64,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub train: TrainConfig,
    pub variants: Vec<Variant>,
    /// Worker threads; 1 is the bit-exact reference mode, 0 means all cores.
    pub jobs: usize,
}

/// Test metrics of a trained model under one visibility setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionResult {
    /// `None` for the GCN baseline, which has no label block.
    pub support_fraction: Option<f64>,
    pub visible_labels: usize,
    pub test: EvalMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub variant: Variant,
    pub split: usize,
    pub init: usize,
    pub seeds: Seeds,
    /// Set when the trial diverged; such trials carry no results.
    pub aborted: Option<String>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub results: Vec<FractionResult>,
}

/// One line of the report: a model at one support fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub support_fraction: Option<f64>,
    /// Mean share of all nodes whose labels were visible, in percent.
    pub label_pct_total: f64,
    pub n_trials: usize,
    pub metrics: BTreeMap<String, Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset: String,
    pub config: SweepConfig,
    pub metric_names: Vec<String>,
    pub total_trials: usize,
    pub aborted_trials: usize,
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialRecord>,
}

impl SweepReport {
    pub fn row(&self, variant: Variant, support_fraction: Option<f64>) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.support_fraction == support_fraction)
    }

    /// One line per row: mean, std and count of each metric.
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["model".to_string(), "support_fraction".into(), "label_pct_total".into(), "n".into()];
        for m in &self.metric_names {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
            header.push(format!("{m}_n"));
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.variant.name().to_string(),
                row.support_fraction.map_or(String::new(), |f| f.to_string()),
                row.label_pct_total.to_string(),
                row.n_trials.to_string(),
            ];
            for m in &self.metric_names {
                match row.metrics.get(m) {
                    Some(s) => rec.extend([s.mean.to_string(), s.std.to_string(), s.n.to_string()]),
                    None => rec.extend([String::new(), String::new(), "0".into()]),
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Shared<'a> {
    dataset: &'a GraphDataset,
    ahat: &'a NormalizedAdjacency,
    splits: &'a [SplitSpec],
    config: &'a SweepConfig,
}

fn run_trial(shared: &Shared, variant: Variant, split_idx: usize, init: usize) -> Result<TrialRecord> {
    let cfg = shared.config;
    let ds = shared.dataset;
    let split = &shared.splits[split_idx];
    let trial = (split_idx * cfg.n_inits + init) as u64;
    let seeds = Seeds {
        init: derive_seed(cfg.seed, STREAM_INIT, trial),
        dropout: derive_seed(cfg.seed, STREAM_DROPOUT, trial),
    };
    let support_seed = derive_seed(cfg.seed, STREAM_SUPPORT, split_idx as u64);
    let model = variant.model_config(ds, cfg.hidden_dim, cfg.dropout_rate);
    let train_input = match variant {
        Variant::Gcn => features_only(ds),
        Variant::LabelGcn => build_input(ds, &visibility_for_phase(split, Phase::Training, 0.0, support_seed)?),
    };
    let inputs = TrialInputs {
        dataset: ds,
        ahat: shared.ahat,
        input: &train_input,
        model,
    };
    let mut record = TrialRecord {
        variant,
        split: split_idx,
        init,
        seeds,
        aborted: None,
        best_epoch: 0,
        epochs_run: 0,
        results: Vec::new(),
    };
    let (params, trial_result) = match train(&inputs, split, &cfg.train, seeds) {
        Ok(r) => r,
        Err(e @ Error::Divergence { .. }) => {
            record.aborted = Some(e.to_string());
            return Ok(record);
        }
        Err(e) => return Err(e),
    };
    record.best_epoch = trial_result.best_epoch;
    record.epochs_run = trial_result.epochs_run;

    let no_test = || Error::InvalidArgument("split has no labeled test nodes".into());
    match variant {
        Variant::Gcn => record.results.push(FractionResult {
            support_fraction: None,
            visible_labels: 0,
            test: trial_result.test.ok_or_else(no_test)?,
        }),
        Variant::LabelGcn => {
            for &f in &cfg.support_fractions {
                let vis = visibility_for_phase(split, Phase::Inference, f, support_seed)?;
                let input = build_input(ds, &vis);
                let graph = GraphInput::new(&model, shared.ahat, &input)?;
                let test = evaluate(&params, &model, &graph, ds, &split.test)?.ok_or_else(no_test)?;
                record.results.push(FractionResult {
                    support_fraction: Some(f),
                    visible_labels: vis.len(),
                    test,
                });
            }
        }
    }
    Ok(record)
}

/// Runs `n_splits × n_inits` trials per variant and aggregates test metrics
/// per support fraction.
///
/// Each Label-GCN trial is trained once with training-phase visibility and
/// then evaluated at every support fraction without retraining.
pub fn run_transductive_sweep(dataset: &GraphDataset, config: &SweepConfig) -> Result<SweepReport> {
    config.train.validate()?;
    if config.n_splits == 0 || config.n_inits == 0 || config.variants.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one split, init and variant".into()));
    }
    if let Some(f) = config.support_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidArgument(format!("support fraction {f} outside [0, 1]")));
    }
    if config.variants.contains(&Variant::LabelGcn) && config.support_fractions.is_empty() {
        return Err(Error::InvalidArgument("label-gcn sweep needs at least one support fraction".into()));
    }
    let ahat = normalize_adjacency(&dataset.adjacency()?)?;
    let splits = (0..config.n_splits)
        .map(|s| sample_split(dataset, config.sizes, derive_seed(config.seed, STREAM_SPLIT, s as u64)))
        .collect::<Result<Vec<_>>>()?;
    let shared = Shared {
        dataset,
        ahat: &ahat,
        splits: &splits,
        config,
    };

    let mut plan = Vec::new();
    for &v in &config.variants {
        for s in 0..config.n_splits {
            for i in 0..config.n_inits {
                plan.push((v, s, i));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let trials = pool
        .install(|| {
            plan.par_iter()
                .map(|&(v, s, i)| run_trial(&shared, v, s, i))
                .collect::<Result<Vec<_>>>()
        })?;

    let total = trials.len();
    let aborted = trials.iter().filter(|t| t.aborted.is_some()).count();
    if aborted as f64 > MAX_ABORT_FRACTION * total as f64 {
        return Err(Error::TooManyAborts { aborted, total });
    }

    let mut metric_names = vec!["accuracy".to_string()];
    if dataset.positive_class.is_some() {
        metric_names.extend(["precision", "recall", "f1"].map(String::from));
    }
    let mut rows = Vec::new();
    for &v in &config.variants {
        let fractions: Vec<Option<f64>> = match v {
            Variant::Gcn => vec![None],
            Variant::LabelGcn => config.support_fractions.iter().map(|&f| Some(f)).collect(),
        };
        for (k, &fraction) in fractions.iter().enumerate() {
            let results: Vec<&FractionResult> = trials
                .iter()
                .filter(|t| t.variant == v && t.aborted.is_none())
                .map(|t| &t.results[k])
                .collect();
            let metrics = metric_names
                .iter()
                .filter_map(|m| summarize(results.iter().map(|r| r.test.get(m))).map(|s| (m.clone(), s)))
                .collect();
            let label_pct_total = if results.is_empty() {
                0.0
            } else {
                100.0 * results.iter().map(|r| r.visible_labels as f64).sum::<f64>()
                    / (results.len() * dataset.n()) as f64
            };
            rows.push(SweepRow {
                variant: v,
                support_fraction: fraction,
                label_pct_total,
                n_trials: results.len(),
                metrics,
            });
        }
    }

    Ok(SweepReport {
        dataset: dataset.name.clone(),
        config: config.clone(),
        metric_names,
        total_trials: total,
        aborted_trials: aborted,
        rows,
        trials,
    })
}
