//! Full-batch training with early stopping, and the two experiment drivers.

mod adam;
mod inductive;
mod sweep;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use inductive::{
    run_inductive_elliptic, InductiveConfig, InductiveProtocol, InductiveReport, InductiveRun, StepResult, VariantSummary,
};
pub use sweep::{run_transductive_sweep, SweepConfig, SweepReport, SweepRow, TrialRecord, Variant};

use serde::{Deserialize, Serialize};

use crate::data::{GraphDataset, InputMatrix, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, ConfusionCounts};
use crate::model::{
    cross_entropy, forward, init_params, loss_and_gradients, predict, GradientOptions, GraphInput, ModelConfig,
    ModelParams, Mode, Targets,
};
use crate::sparse::NormalizedAdjacency;

/// splitmix64 finalizer over `(base, stream, index)`, used to hand every
/// trial and epoch its own independent seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub max_epochs: usize,
    /// `None` disables early stopping.
    pub patience: Option<usize>,
    /// Loss weight multiplier for nodes of the dataset's positive class.
    pub oversample_factor: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            max_epochs: 300,
            patience: Some(10),
            oversample_factor: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be > 0", a.learning_rate)));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return Err(Error::InvalidArgument("adam betas must lie in [0, 1) and epsilon > 0".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be >= 1".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::InvalidArgument("patience must be >= 1 when enabled".into()));
        }
        if self.oversample_factor == 0 {
            return Err(Error::InvalidArgument("oversample factor must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub init: u64,
    pub dropout: u64,
}

/// Graph, training-phase input and architecture for one trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialInputs<'a> {
    pub dataset: &'a GraphDataset,
    pub ahat: &'a NormalizedAdjacency,
    pub input: &'a InputMatrix,
    pub model: ModelConfig,
}

/// Metrics over one node set. Precision, recall and F1 refer to the dataset's
/// positive class and are present only when it has one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub n: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub confusion: Option<ConfusionCounts>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl EvalMetrics {
    /// Named metric lookup used by report aggregation.
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "accuracy" => Some(self.accuracy),
            "loss" => Some(self.loss),
            "precision" => self.precision,
            "recall" => self.recall,
            "f1" => self.f1,
            _ => None,
        }
    }
}

/// Eval-mode metrics on the labeled members of `nodes`; `None` when there are none.
pub fn evaluate(
    params: &ModelParams,
    model: &ModelConfig,
    graph: &GraphInput,
    dataset: &GraphDataset,
    nodes: &[usize],
) -> Result<Option<EvalMetrics>> {
    let targets = Targets::from_labels(nodes, &dataset.labels);
    if targets.is_empty() {
        return Ok(None);
    }
    let trace = forward(params, model, graph, Mode::Eval)?;
    let loss = cross_entropy(&trace.probs, &targets)?;
    let preds: Vec<usize> = predict(params, model, graph, &targets.nodes)?.iter().map(|p| p.class).collect();
    let confusion = dataset
        .positive_class
        .map(|c| ConfusionCounts::from_predictions(&preds, &targets.classes, c))
        .transpose()?;
    let prf = confusion.map(|c| c.prf());
    Ok(Some(EvalMetrics {
        n: targets.len(),
        loss,
        accuracy: accuracy(&preds, &targets.classes)?,
        confusion,
        precision: prf.and_then(|p| p.precision),
        recall: prf.and_then(|p| p.recall),
        f1: prf.and_then(|p| p.f1),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub validation: Option<EvalMetrics>,
    pub test: Option<EvalMetrics>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Training loss of each epoch, before its update.
    pub train_loss: Vec<f64>,
    /// Validation loss after each epoch's update; empty without a validation set.
    pub validation_loss: Vec<f64>,
}

/// Loss targets for the training nodes, with the positive class reweighted.
pub fn training_targets(dataset: &GraphDataset, nodes: &[usize], oversample_factor: usize) -> Targets {
    let targets = Targets::from_labels(nodes, &dataset.labels);
    match dataset.positive_class {
        Some(c) if oversample_factor > 1 => targets.oversample(c, oversample_factor),
        _ => targets,
    }
}

/// Trains one model on `split.train`, early-stopping on `split.validation`.
///
/// With an empty validation set the run lasts `max_epochs` and returns the
/// final parameters.
pub fn train(inputs: &TrialInputs, split: &SplitSpec, config: &TrainConfig, seeds: Seeds) -> Result<(ModelParams, TrialResult)> {
    config.validate()?;
    let model = &inputs.model;
    let graph = GraphInput::new(model, inputs.ahat, inputs.input)?;
    let targets = training_targets(inputs.dataset, &split.train, config.oversample_factor);
    if targets.is_empty() {
        return Err(Error::EmptyTargets);
    }
    let val_targets = Targets::from_labels(&split.validation, &inputs.dataset.labels);

    let mut params = init_params(model, seeds.init)?;
    let mut state = AdamState::new(model);
    let mut best = (f64::INFINITY, 0, params.clone());
    let mut since_best = 0;
    let mut train_loss = Vec::new();
    let mut validation_loss = Vec::new();
    let mut epochs_run = 0;

    for epoch in 1..=config.max_epochs {
        epochs_run = epoch;
        let mode = Mode::Train {
            dropout_seed: derive_seed(seeds.dropout, 0, epoch as u64),
        };
        let trace = forward(&params, model, &graph, mode)?;
        let (loss, grads) = loss_and_gradients(&params, model, &graph, &targets, &trace, GradientOptions::default())?;
        if !loss.is_finite() || !grads.params.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        adam_step(&mut params, &grads.params, &mut state, &config.adam);
        if !params.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        train_loss.push(loss);

        if val_targets.is_empty() {
            continue;
        }
        let val = cross_entropy(&forward(&params, model, &graph, Mode::Eval)?.probs, &val_targets)?;
        if !val.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        validation_loss.push(val);
        if val < best.0 {
            best = (val, epoch, params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }

    let (best_epoch, params) = if val_targets.is_empty() {
        (epochs_run, params)
    } else {
        (best.1, best.2)
    };
    let result = TrialResult {
        validation: evaluate(&params, model, &graph, inputs.dataset, &split.validation)?,
        test: evaluate(&params, model, &graph, inputs.dataset, &split.test)?,
        best_epoch,
        epochs_run,
        train_loss,
        validation_loss,
    };
    Ok((params, result))
}
