//! Two graph convolutions, a dense softmax head, dropout, and the exact
//! reverse pass through all of it.
//!
//! ```text
//! P  = propagate(Â, X)          masked on label columns for Label-GCN
//! H1 = relu(P · W0)             dropout
//! H2 = relu(Â · H1 · W1)        dropout
//! Y  = softmax(H2 · W2 + b2)
//! ```

pub mod checkpoint;
pub mod gradcheck;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::InputMatrix;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::{propagate_masked, propagate_masked_adjoint, spmm, LabelColumnMask, NormalizedAdjacency};

/// Probabilities are clamped to this value before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub dropout_rate: f64,
    /// Label-GCN when set: the first convolution skips self-loops on label columns.
    pub masked_first_layer: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.n_classes == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive: {self:?}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub w0: DenseMatrix,
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
    pub b2: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            w0: DenseMatrix::zeros(config.input_dim, config.hidden_dim),
            w1: DenseMatrix::zeros(config.hidden_dim, config.hidden_dim),
            w2: DenseMatrix::zeros(config.hidden_dim, config.n_classes),
            b2: vec![0.0; config.n_classes],
        }
    }

    /// Parameter tensors as flat slices, in the fixed order W0, W1, W2, b2.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [self.w0.data(), self.w1.data(), self.w2.data(), &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w0.data_mut(),
            self.w1.data_mut(),
            self.w2.data_mut(),
            &mut self.b2,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expect = [
            (self.w0.shape(), (config.input_dim, config.hidden_dim), "W0"),
            (self.w1.shape(), (config.hidden_dim, config.hidden_dim), "W1"),
            (self.w2.shape(), (config.hidden_dim, config.n_classes), "W2"),
            ((1, self.b2.len()), (1, config.n_classes), "b2"),
        ];
        for (found, want, name) in expect {
            if found != want {
                return Err(Error::dims(
                    "model parameters",
                    format!("{name} {want:?}"),
                    format!("{found:?}"),
                ));
            }
        }
        Ok(())
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

/// Glorot-uniform weights and a zero bias, deterministic in `seed`.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ModelParams {
        w0: glorot(config.input_dim, config.hidden_dim, &mut rng),
        w1: glorot(config.hidden_dim, config.hidden_dim, &mut rng),
        w2: glorot(config.hidden_dim, config.n_classes, &mut rng),
        b2: vec![0.0; config.n_classes],
    })
}

/// A normalized adjacency paired with an input matrix, with the first
/// propagation (which does not depend on the weights) computed once.
#[derive(Debug, Clone)]
pub struct GraphInput<'a> {
    pub ahat: &'a NormalizedAdjacency,
    pub input: &'a InputMatrix,
    propagated: DenseMatrix,
}

impl<'a> GraphInput<'a> {
    pub fn new(config: &ModelConfig, ahat: &'a NormalizedAdjacency, input: &'a InputMatrix) -> Result<Self> {
        if input.x.n_cols() != config.input_dim {
            return Err(Error::dims(
                "GraphInput",
                format!("{} input columns", config.input_dim),
                input.x.n_cols(),
            ));
        }
        let propagated = if config.masked_first_layer {
            propagate_masked(ahat, &input.x, &input.mask)?
        } else {
            spmm(ahat.matrix(), &input.x)?
        };
        Ok(Self {
            ahat,
            input,
            propagated,
        })
    }

    pub fn n(&self) -> usize {
        self.ahat.n()
    }

    /// First-layer propagation `ÂX` (masked when the config asks for it).
    pub fn propagated(&self) -> &DenseMatrix {
        &self.propagated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train { dropout_seed: u64 },
    Eval,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub z1: DenseMatrix,
    pub h1: DenseMatrix,
    /// Per-entry dropout scale (0 or 1/(1-rate)); `None` when no dropout was applied.
    pub drop1: Option<Vec<f64>>,
    pub d1: DenseMatrix,
    pub s2: DenseMatrix,
    pub z2: DenseMatrix,
    pub h2: DenseMatrix,
    pub drop2: Option<Vec<f64>>,
    pub d2: DenseMatrix,
    pub logits: DenseMatrix,
    pub probs: DenseMatrix,
}

fn relu(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    out.map_inplace(|v| v.max(0.0));
    out
}

fn dropout_scales(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { scale })
        .collect()
}

fn apply_scales(m: &DenseMatrix, scales: &Option<Vec<f64>>) -> DenseMatrix {
    let mut out = m.clone();
    if let Some(s) = scales {
        for (v, k) in out.data_mut().iter_mut().zip(s) {
            *v *= k;
        }
    }
    out
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut probs = logits.clone();
    if probs.n_cols() == 0 {
        return probs;
    }
    for i in 0..probs.n_rows() {
        let row = probs.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    probs
}

/// Forward pass over the whole graph.
pub fn forward(params: &ModelParams, config: &ModelConfig, graph: &GraphInput, mode: Mode) -> Result<ForwardTrace> {
    params.check_shapes(config)?;
    let mut rng = match mode {
        Mode::Train { dropout_seed } if config.dropout_rate > 0.0 => {
            Some(ChaCha8Rng::seed_from_u64(dropout_seed))
        }
        _ => None,
    };
    let n = graph.n();
    let h = config.hidden_dim;

    let z1 = graph.propagated.matmul(&params.w0)?;
    let h1 = relu(&z1);
    let drop1 = rng.as_mut().map(|r| dropout_scales(n * h, config.dropout_rate, r));
    let d1 = apply_scales(&h1, &drop1);

    let s2 = spmm(graph.ahat.matrix(), &d1)?;
    let z2 = s2.matmul(&params.w1)?;
    let h2 = relu(&z2);
    let drop2 = rng.as_mut().map(|r| dropout_scales(n * h, config.dropout_rate, r));
    let d2 = apply_scales(&h2, &drop2);

    let mut logits = d2.matmul(&params.w2)?;
    for i in 0..n {
        for (v, b) in logits.row_mut(i).iter_mut().zip(&params.b2) {
            *v += b;
        }
    }
    let probs = softmax_rows(&logits);
    Ok(ForwardTrace {
        z1,
        h1,
        drop1,
        d1,
        s2,
        z2,
        h2,
        drop2,
        d2,
        logits,
        probs,
    })
}

/// Convenience wrapper that prepares the input and runs [`forward`].
pub fn forward_input(
    params: &ModelParams,
    config: &ModelConfig,
    ahat: &NormalizedAdjacency,
    input: &InputMatrix,
    mode: Mode,
) -> Result<ForwardTrace> {
    forward(params, config, &GraphInput::new(config, ahat, input)?, mode)
}

/// Supervised nodes with their classes and non-negative loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub nodes: Vec<usize>,
    pub classes: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Targets {
    /// Unit weight for every node.
    pub fn new(nodes: Vec<usize>, classes: Vec<usize>) -> Self {
        let weights = vec![1.0; nodes.len()];
        Self {
            nodes,
            classes,
            weights,
        }
    }

    /// Targets for `nodes` read from a label vector; unlabeled nodes are skipped.
    pub fn from_labels(nodes: &[usize], labels: &[Option<usize>]) -> Self {
        let (nodes, classes) = nodes
            .iter()
            .filter_map(|&i| labels[i].map(|c| (i, c)))
            .unzip();
        Self::new(nodes, classes)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    /// Multiplies the weight of every node of class `class` by `factor`.
    pub fn oversample(mut self, class: usize, factor: usize) -> Self {
        for (w, &c) in self.weights.iter_mut().zip(&self.classes) {
            if c == class {
                *w *= factor as f64;
            }
        }
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn validate(&self, n: usize, k: usize) -> Result<f64> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyTargets);
        }
        if self.classes.len() != self.nodes.len() || self.weights.len() != self.nodes.len() {
            return Err(Error::dims(
                "targets",
                format!("{} classes and weights", self.nodes.len()),
                format!("{} / {}", self.classes.len(), self.weights.len()),
            ));
        }
        if let Some(&i) = self.nodes.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!("target node {i} out of range")));
        }
        if let Some(&c) = self.classes.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidArgument(format!("target class {c} out of range")));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("target weights must be finite and >= 0".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("target weights sum to zero".into()));
        }
        Ok(total)
    }
}

/// Weighted mean cross-entropy of `probs` over the targets.
pub fn cross_entropy(probs: &DenseMatrix, targets: &Targets) -> Result<f64> {
    let total = targets.validate(probs.n_rows(), probs.n_cols())?;
    let sum: f64 = targets
        .nodes
        .iter()
        .zip(&targets.classes)
        .zip(&targets.weights)
        .map(|((&i, &c), &w)| -w * probs.get(i, c).max(LOG_CLAMP).ln())
        .sum();
    Ok(sum / total)
}

/// Gradients shaped like [`ModelParams`], plus the gradient with respect to
/// the input matrix when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: ModelParams,
    pub input: Option<DenseMatrix>,
}

/// Which adjoint to use for the input gradient. `Corrupted` exists so the
/// gradient checker can prove it detects a wrong adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointKind {
    #[default]
    Exact,
    Corrupted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GradientOptions {
    pub input_gradient: bool,
    pub adjoint: AdjointKind,
}

fn hadamard_relu_mask(grad: &mut DenseMatrix, pre: &DenseMatrix) {
    for (g, &z) in grad.data_mut().iter_mut().zip(pre.data()) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Loss and its exact reverse-mode gradient for a recorded forward pass.
pub fn loss_and_gradients(
    params: &ModelParams,
    config: &ModelConfig,
    graph: &GraphInput,
    targets: &Targets,
    trace: &ForwardTrace,
    options: GradientOptions,
) -> Result<(f64, Gradients)> {
    let total = targets.validate(graph.n(), config.n_classes)?;
    let loss = cross_entropy(&trace.probs, targets)?;

    let k = config.n_classes;
    let mut dlogits = DenseMatrix::zeros(graph.n(), k);
    for ((&i, &c), &w) in targets.nodes.iter().zip(&targets.classes).zip(&targets.weights) {
        let p = trace.probs.row(i);
        // below the clamp the loss is constant in the logits
        if p[c] < LOG_CLAMP {
            continue;
        }
        let scale = w / total;
        let row = dlogits.row_mut(i);
        for (j, (g, &pj)) in row.iter_mut().zip(p).enumerate() {
            *g += scale * (pj - if j == c { 1.0 } else { 0.0 });
        }
    }

    let dw2 = trace.d2.t_matmul(&dlogits)?;
    let mut db2 = vec![0.0; k];
    for row in dlogits.rows() {
        for (b, g) in db2.iter_mut().zip(row) {
            *b += g;
        }
    }
    let mut dz2 = apply_scales(&dlogits.matmul_t(&params.w2)?, &trace.drop2);
    hadamard_relu_mask(&mut dz2, &trace.z2);

    let dw1 = trace.s2.t_matmul(&dz2)?;
    let ds2 = dz2.matmul_t(&params.w1)?;
    // Â is symmetric, so its adjoint is itself
    let dd1 = spmm(graph.ahat.matrix(), &ds2)?;
    let mut dz1 = apply_scales(&dd1, &trace.drop1);
    hadamard_relu_mask(&mut dz1, &trace.z1);

    let dw0 = graph.propagated.t_matmul(&dz1)?;

    let input = if options.input_gradient {
        let dp = dz1.matmul_t(&params.w0)?;
        let mask = if config.masked_first_layer {
            graph.input.mask.clone()
        } else {
            LabelColumnMask::empty()
        };
        let mask = match options.adjoint {
            AdjointKind::Exact => mask,
            AdjointKind::Corrupted => {
                let flipped = (0..dp.n_cols()).filter(|c| !mask.columns().contains(c)).collect();
                LabelColumnMask::new(flipped)?
            }
        };
        Some(propagate_masked_adjoint(graph.ahat, &dp, &mask)?)
    } else {
        None
    };

    Ok((
        loss,
        Gradients {
            params: ModelParams {
                w0: dw0,
                w1: dw1,
                w2: dw2,
                b2: db2,
            },
            input,
        },
    ))
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub node: usize,
    pub class: usize,
    pub probs: Vec<f64>,
}

/// Eval-mode class predictions for `nodes`.
pub fn predict(params: &ModelParams, config: &ModelConfig, graph: &GraphInput, nodes: &[usize]) -> Result<Vec<Prediction>> {
    let trace = forward(params, config, graph, Mode::Eval)?;
    Ok(nodes
        .iter()
        .map(|&i| {
            let probs = trace.probs.row(i).to_vec();
            Prediction {
                node: i,
                class: argmax(&probs),
                probs,
            }
        })
        .collect())
}

/// Eval-mode predictions where each node in `nodes` is scored as if its own
/// label-block entries were zero while every other label stays visible.
///
/// A node's own label reaches its output only through first-layer
/// activations of the nodes it feeds (its neighbours, plus itself without
/// masking), so the removal is an exact local correction of those rows
/// rather than one forward pass per node.
pub fn predict_leave_one_out(
    params: &ModelParams,
    config: &ModelConfig,
    graph: &GraphInput,
    nodes: &[usize],
) -> Result<Vec<Prediction>> {
    let trace = forward(params, config, graph, Mode::Eval)?;
    let x = &graph.input.x;
    let label_cols = graph.input.mask.columns();
    let h = config.hidden_dim;
    let mut out = Vec::with_capacity(nodes.len());
    for &i in nodes {
        if i >= graph.n() {
            return Err(Error::InvalidArgument(format!("node {i} out of range")));
        }
        let mut delta = vec![0.0; h];
        for &c in label_cols {
            let v = x.get(i, c);
            if v != 0.0 {
                for (d, &w) in delta.iter_mut().zip(params.w0.row(c)) {
                    *d += v * w;
                }
            }
        }
        if delta.iter().all(|&d| d == 0.0) {
            let probs = trace.probs.row(i).to_vec();
            out.push(Prediction {
                node: i,
                class: argmax(&probs),
                probs,
            });
            continue;
        }
        let mut s2 = trace.s2.row(i).to_vec();
        let (cols, vals) = graph.ahat.matrix().row(i);
        for (&j, &a) in cols.iter().zip(vals) {
            if j == i && config.masked_first_layer {
                continue;
            }
            // Â is symmetric, so Â[j][i] == a
            for k in 0..h {
                let fixed = (trace.z1.get(j, k) - a * delta[k]).max(0.0);
                s2[k] += a * (fixed - trace.h1.get(j, k));
            }
        }
        let s2 = DenseMatrix::from_vec(1, h, s2)?;
        let mut h2 = s2.matmul(&params.w1)?;
        h2.map_inplace(|v| v.max(0.0));
        let mut logits = h2.matmul(&params.w2)?;
        for (v, b) in logits.row_mut(0).iter_mut().zip(&params.b2) {
            *v += b;
        }
        let probs = softmax_rows(&logits).row(0).to_vec();
        out.push(Prediction {
            node: i,
            class: argmax(&probs),
            probs,
        });
    }
    Ok(out)
}

/// Eval-mode last hidden layer (before the dense head) for `nodes`.
pub fn embeddings(params: &ModelParams, config: &ModelConfig, graph: &GraphInput, nodes: &[usize]) -> Result<DenseMatrix> {
    let trace = forward(params, config, graph, Mode::Eval)?;
    Ok(trace.h2.select_rows(nodes))
}
