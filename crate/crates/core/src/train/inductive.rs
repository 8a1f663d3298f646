use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::MAX_ABORT_FRACTION;
use super::{derive_seed, train, AdamConfig, Seeds, TrainConfig, TrialInputs, Variant};
use crate::data::{build_input, features_only, GraphDataset, InputMatrix, LabelVisibility, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{summarize, ConfusionCounts, Prf, Summary};
use crate::model::{predict, predict_leave_one_out, GraphInput, ModelConfig, ModelParams};
use crate::sparse::normalize_adjacency;

/// Which labels are visible when scoring step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InductiveProtocol {
    /// Labels of every node before `t`; nothing at `t` is revealed.
    HideStep,
    /// Every label up to and including `t`, except the scored node's own.
    LeaveOneOut,
}

impl InductiveProtocol {
    pub fn name(self) -> &'static str {
        match self {
            InductiveProtocol::HideStep => "hide-step",
            InductiveProtocol::LeaveOneOut => "leave-one-out",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hide-step" => Ok(InductiveProtocol::HideStep),
            "leave-one-out" => Ok(InductiveProtocol::LeaveOneOut),
            other => Err(Error::InvalidArgument(format!("unknown inductive protocol {other:?}"))),
        }
    }
}

const STREAM_INIT: u64 = 5;
const STREAM_DROPOUT: u64 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductiveConfig {
    /// Last time step used for training.
    pub train_until: u32,
    /// Last time step scored.
    pub last_step: u32,
    /// First step of the post-shutdown aggregate.
    pub shutdown_step: u32,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub train: TrainConfig,
    pub n_inits: usize,
    pub seed: u64,
    pub variants: Vec<Variant>,
    pub protocol: InductiveProtocol,
    pub jobs: usize,
}

impl Default for InductiveConfig {
    fn default() -> Self {
        Self {
            train_until: 34,
            last_step: 49,
            shutdown_step: 43,
            hidden_dim: 100,
            dropout_rate: 0.5,
            train: TrainConfig {
                adam: AdamConfig {
                    learning_rate: 0.001,
                    ..Default::default()
                },
                max_epochs: 1000,
                patience: None,
                oversample_factor: 6,
            },
            n_inits: 5,
            seed: 0,
            variants: vec![Variant::Gcn, Variant::LabelGcn],
            protocol: InductiveProtocol::HideStep,
            jobs: 0,
        }
    }
}

/// Positive-class scores at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub time_step: u32,
    pub n_scored: usize,
    pub counts: ConfusionCounts,
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductiveRun {
    pub variant: Variant,
    pub init: usize,
    pub seeds: Seeds,
    pub aborted: Option<String>,
    pub epochs_run: usize,
    pub final_train_loss: Option<f64>,
    pub steps: Vec<StepResult>,
    /// Counts pooled over every scored step.
    pub pooled: Prf,
    /// Counts pooled over steps at or after the shutdown step.
    pub post_shutdown: Prf,
}

/// Spread of a variant's metrics over its initializations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub n_runs: usize,
    pub precision: Option<Summary>,
    pub recall: Option<Summary>,
    pub f1: Option<Summary>,
    pub f1_post_shutdown: Option<Summary>,
    /// Mean of the per-step F1 values; steps with undefined F1 are skipped.
    pub f1_step_mean: Option<Summary>,
    /// Per-step F1 over initializations, in time order.
    pub per_step_f1: Vec<(u32, Option<Summary>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductiveReport {
    pub dataset: String,
    pub config: InductiveConfig,
    pub runs: Vec<InductiveRun>,
    pub summaries: Vec<VariantSummary>,
}

fn fmt_opt(s: Option<Summary>) -> [String; 2] {
    match s {
        Some(s) => [s.mean.to_string(), s.std.to_string()],
        None => [String::new(), String::new()],
    }
}

impl InductiveReport {
    pub fn summary(&self, variant: Variant) -> Option<&VariantSummary> {
        self.summaries.iter().find(|s| s.variant == variant)
    }

    /// One row per model with pooled and post-shutdown scores.
    pub fn write_summary_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "model",
            "n",
            "precision_mean",
            "precision_std",
            "recall_mean",
            "recall_std",
            "f1_mean",
            "f1_std",
            "f1_post_shutdown_mean",
            "f1_post_shutdown_std",
        ])?;
        for s in &self.summaries {
            let mut rec = vec![s.variant.name().to_string(), s.n_runs.to_string()];
            for v in [s.precision, s.recall, s.f1, s.f1_post_shutdown] {
                rec.extend(fmt_opt(v));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per time step with each model's F1 mean and std.
    pub fn write_steps_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time_step".to_string()];
        for s in &self.summaries {
            header.push(format!("{}_f1_mean", s.variant.name()));
            header.push(format!("{}_f1_std", s.variant.name()));
        }
        w.write_record(&header)?;
        for t in self.config.train_until + 1..=self.config.last_step {
            let mut rec = vec![t.to_string()];
            for s in &self.summaries {
                let cell = s.per_step_f1.iter().find(|(step, _)| *step == t).and_then(|(_, v)| *v);
                rec.extend(fmt_opt(cell));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_steps(dataset: &GraphDataset, config: &InductiveConfig) -> Result<Vec<u32>> {
    let Some(steps) = dataset.time_step.clone() else {
        return Err(Error::InvalidArgument(format!("dataset {} has no time steps", dataset.name)));
    };
    if dataset.positive_class.is_none() {
        return Err(Error::InvalidArgument("inductive evaluation needs a positive class".into()));
    }
    if !(1 <= config.train_until && config.train_until < config.last_step) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= train_until ({}) < last_step ({})",
            config.train_until, config.last_step
        )));
    }
    let mut present = vec![false; config.last_step as usize + 1];
    for &t in &steps {
        if let Some(p) = present.get_mut(t as usize) {
            *p = true;
        }
    }
    if let Some(t) = (1..=config.last_step).find(|&t| !present[t as usize]) {
        return Err(Error::InvalidArgument(format!("time step {t} has no nodes")));
    }
    Ok(steps)
}

fn variant_input(variant: Variant, ds: &GraphDataset, vis: &LabelVisibility) -> InputMatrix {
    match variant {
        Variant::Gcn => features_only(ds),
        Variant::LabelGcn => build_input(ds, vis),
    }
}

struct Trained {
    variant: Variant,
    init: usize,
    seeds: Seeds,
    model: ModelConfig,
    outcome: std::result::Result<(ModelParams, usize, Option<f64>), String>,
}

/// Trains on the graph up to `train_until` and scores every later step on
/// the graph grown up to that step.
///
/// Under [`InductiveProtocol::HideStep`] every labeled node before `t` has its
/// label in the input and no label at step `t` is revealed. Under
/// [`InductiveProtocol::LeaveOneOut`] each scored node sees every label up to
/// `t` except its own.
pub fn run_inductive_elliptic(dataset: &GraphDataset, config: &InductiveConfig) -> Result<InductiveReport> {
    config.train.validate()?;
    if config.n_inits == 0 || config.variants.is_empty() {
        return Err(Error::InvalidArgument("need at least one init and variant".into()));
    }
    let steps = check_steps(dataset, config)?;
    let positive = dataset.positive_class.expect("checked");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

    let train_nodes: Vec<usize> = (0..dataset.n()).filter(|&i| steps[i] <= config.train_until).collect();
    let train_ds = dataset.induced(&train_nodes);
    let train_ahat = normalize_adjacency(&train_ds.adjacency()?)?;
    let labeled = train_ds.labeled_nodes();
    let train_vis = LabelVisibility::from_nodes(labeled.clone());
    let split = SplitSpec {
        train: labeled,
        validation: vec![],
        test: vec![],
        support: vec![],
    };

    let mut plan = Vec::new();
    for &v in &config.variants {
        for i in 0..config.n_inits {
            plan.push((v, i));
        }
    }
    let trained: Vec<Trained> = pool.install(|| {
        plan.par_iter()
            .map(|&(variant, init)| -> Result<Trained> {
                let seeds = Seeds {
                    init: derive_seed(config.seed, STREAM_INIT, init as u64),
                    dropout: derive_seed(config.seed, STREAM_DROPOUT, init as u64),
                };
                let input = variant_input(variant, &train_ds, &train_vis);
                let model = variant.model_config(&train_ds, config.hidden_dim, config.dropout_rate);
                let inputs = TrialInputs {
                    dataset: &train_ds,
                    ahat: &train_ahat,
                    input: &input,
                    model,
                };
                let outcome = match train(&inputs, &split, &config.train, seeds) {
                    Ok((params, r)) => Ok((params, r.epochs_run, r.train_loss.last().copied())),
                    Err(e @ Error::Divergence { .. }) => Err(e.to_string()),
                    Err(e) => return Err(e),
                };
                Ok(Trained {
                    variant,
                    init,
                    seeds,
                    model,
                    outcome,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let aborted = trained.iter().filter(|t| t.outcome.is_err()).count();
    if aborted as f64 > MAX_ABORT_FRACTION * trained.len() as f64 {
        return Err(Error::TooManyAborts {
            aborted,
            total: trained.len(),
        });
    }

    // per step, the grown graph is built once and shared by every model
    let mut step_results: Vec<Vec<StepResult>> = vec![Vec::new(); trained.len()];
    for t in config.train_until + 1..=config.last_step {
        let keep: Vec<usize> = (0..dataset.n()).filter(|&i| steps[i] <= t).collect();
        let sub = dataset.induced(&keep);
        let ahat = normalize_adjacency(&sub.adjacency()?)?;
        let sub_steps = sub.time_step.as_ref().expect("induced keeps time steps");
        let vis = match config.protocol {
            InductiveProtocol::HideStep => {
                LabelVisibility::from_nodes(sub.labeled_nodes().into_iter().filter(|&i| sub_steps[i] < t).collect())
            }
            InductiveProtocol::LeaveOneOut => LabelVisibility::from_nodes(sub.labeled_nodes()),
        };
        let scored: Vec<usize> = sub.labeled_nodes().into_iter().filter(|&i| sub_steps[i] == t).collect();
        let truth: Vec<usize> = scored.iter().map(|&i| sub.labels[i].expect("labeled")).collect();
        let mut inputs: Vec<(Variant, InputMatrix)> = Vec::new();
        for &v in &config.variants {
            inputs.push((v, variant_input(v, &sub, &vis)));
        }
        let results = pool.install(|| {
            trained
                .par_iter()
                .map(|tr| -> Result<Option<StepResult>> {
                    let Ok((params, _, _)) = &tr.outcome else {
                        return Ok(None);
                    };
                    let input = &inputs.iter().find(|(v, _)| *v == tr.variant).expect("variant input").1;
                    let graph = GraphInput::new(&tr.model, &ahat, input)?;
                    let preds = match config.protocol {
                        InductiveProtocol::HideStep => predict(params, &tr.model, &graph, &scored)?,
                        InductiveProtocol::LeaveOneOut => predict_leave_one_out(params, &tr.model, &graph, &scored)?,
                    };
                    let preds: Vec<usize> = preds.iter().map(|p| p.class).collect();
                    let counts = ConfusionCounts::from_predictions(&preds, &truth, positive)?;
                    Ok(Some(StepResult {
                        time_step: t,
                        n_scored: scored.len(),
                        counts,
                        prf: counts.prf(),
                    }))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (k, r) in results.into_iter().enumerate() {
            step_results[k].extend(r);
        }
    }

    let runs: Vec<InductiveRun> = trained
        .into_iter()
        .zip(step_results)
        .map(|(tr, steps)| {
            let pooled: ConfusionCounts = steps.iter().map(|s| s.counts).sum();
            let post: ConfusionCounts = steps
                .iter()
                .filter(|s| s.time_step >= config.shutdown_step)
                .map(|s| s.counts)
                .sum();
            let (aborted, epochs_run, final_train_loss) = match tr.outcome {
                Ok((_, e, l)) => (None, e, l),
                Err(msg) => (Some(msg), 0, None),
            };
            InductiveRun {
                variant: tr.variant,
                init: tr.init,
                seeds: tr.seeds,
                aborted,
                epochs_run,
                final_train_loss,
                steps,
                pooled: pooled.prf(),
                post_shutdown: post.prf(),
            }
        })
        .collect();

    let summaries = config
        .variants
        .iter()
        .map(|&v| {
            let ok: Vec<&InductiveRun> = runs.iter().filter(|r| r.variant == v && r.aborted.is_none()).collect();
            let per_step_f1 = (config.train_until + 1..=config.last_step)
                .map(|t| {
                    let vals = ok
                        .iter()
                        .map(|r| r.steps.iter().find(|s| s.time_step == t).and_then(|s| s.prf.f1));
                    (t, summarize(vals))
                })
                .collect();
            let step_means = ok.iter().map(|r| summarize(r.steps.iter().map(|s| s.prf.f1)).map(|s| s.mean));
            VariantSummary {
                variant: v,
                n_runs: ok.len(),
                precision: summarize(ok.iter().map(|r| r.pooled.precision)),
                recall: summarize(ok.iter().map(|r| r.pooled.recall)),
                f1: summarize(ok.iter().map(|r| r.pooled.f1)),
                f1_post_shutdown: summarize(ok.iter().map(|r| r.post_shutdown.f1)),
                f1_step_mean: summarize(step_means),
                per_step_f1,
            }
        })
        .collect();

    Ok(InductiveReport {
        dataset: dataset.name.clone(),
        config: config.clone(),
        runs,
        summaries,
    })
}
