//! Central finite-difference check of [`loss_and_gradients`](super::loss_and_gradients).
//!
//! The numerical side only ever calls the forward pass, so it shares nothing
//! with the reverse pass it is checking.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    cross_entropy, forward, loss_and_gradients, GradientOptions, GraphInput, ModelConfig, ModelParams, Mode,
    Targets,
};
use super::init_params;
use crate::data::InputMatrix;
use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::sparse::{build_adjacency, normalize_adjacency, LabelColumnMask, NormalizedAdjacency};
use crate::synthetic::random_edges;

/// Gradient coordinates smaller than `LOSS_SCALE_FLOOR · max(|loss|, 1)` are
/// compared at that scale instead of their own. A central difference at
/// ε = 1e-5 carries about `f64::EPSILON · |loss| / ε ≈ 2e-11 · |loss|` of
/// rounding noise, which would otherwise swamp the relative error of
/// near-zero coordinates. The floor sits ~5e6 times above that noise.
pub const LOSS_SCALE_FLOOR: f64 = 1e-4;

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(floor);
    if scale == 0.0 {
        return 0.0;
    }
    (analytic - numeric).abs() / scale
}

/// A self-contained problem for [`gradient_check`].
#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub ahat: NormalizedAdjacency,
    pub input: InputMatrix,
    pub targets: Targets,
}

/// Random graph on `n` nodes with 6 features, a 3-class one-hot label block
/// filled for roughly half the nodes, and weighted targets on the rest.
pub fn random_case(n: usize, masked: bool, seed: u64) -> Result<GradCheckCase> {
    let (d, k) = (6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_edges(n, 0.2, &mut rng);
    let ahat = normalize_adjacency(&build_adjacency(&edges, n)?)?;
    let mut x = DenseMatrix::from_fn(n, d + k, |_, c| if c < d { rng.gen_range(-1.0..1.0) } else { 0.0 });
    let mut nodes = Vec::new();
    let mut classes = Vec::new();
    for i in 0..n {
        let class = rng.gen_range(0..k);
        if rng.gen_bool(0.5) {
            x.set(i, d + class, 1.0);
        } else {
            nodes.push(i);
            classes.push(class);
        }
    }
    if nodes.is_empty() {
        nodes.push(0);
        classes.push(0);
    }
    let weights = (0..nodes.len()).map(|_| rng.gen_range(0.5..2.0)).collect();
    let config = ModelConfig {
        input_dim: d + k,
        hidden_dim: 8,
        n_classes: k,
        dropout_rate: 0.5,
        masked_first_layer: masked,
    };
    let mut params = init_params(&config, seed)?;
    for b in &mut params.b2 {
        *b = rng.gen_range(-0.1..0.1);
    }
    Ok(GradCheckCase {
        config,
        params,
        ahat,
        input: InputMatrix {
            x,
            mask: LabelColumnMask::trailing(d + k, k),
        },
        targets: Targets::new(nodes, classes).with_weights(weights),
    })
}

impl GradCheckCase {
    pub fn check(&self, options: GradCheckOptions) -> Result<GradCheckReport> {
        gradient_check(&self.params, &self.config, &self.ahat, &self.input, &self.targets, options)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub coordinates: usize,
    /// Coordinates skipped because the ±ε step crossed a ReLU kink.
    pub kinks_skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Coordinates sampled per tensor (all of them if the tensor is smaller).
    pub coordinates: usize,
    pub seed: u64,
    /// Also check the gradient with respect to the input matrix.
    pub gradient: GradientOptions,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            coordinates: 20,
            seed: 0,
            gradient: GradientOptions {
                input_gradient: true,
                ..Default::default()
            },
        }
    }
}

/// Loss plus the on/off pattern of every ReLU, used to spot perturbations
/// that step across a kink.
fn eval_loss(params: &ModelParams, config: &ModelConfig, graph: &GraphInput, targets: &Targets) -> Result<(f64, Vec<bool>)> {
    let trace = forward(params, config, graph, Mode::Eval)?;
    let pattern = trace.z1.data().iter().chain(trace.z2.data()).map(|&z| z > 0.0).collect();
    Ok((cross_entropy(&trace.probs, targets)?, pattern))
}

/// Central difference, or `None` when the two evaluations straddle a ReLU kink.
fn central(plus: (f64, Vec<bool>), minus: (f64, Vec<bool>), eps: f64) -> Option<f64> {
    (plus.1 == minus.1).then(|| (plus.0 - minus.0) / (2.0 * eps))
}

/// Compares analytic and central-difference gradients (dropout off).
pub fn gradient_check(
    params: &ModelParams,
    config: &ModelConfig,
    ahat: &NormalizedAdjacency,
    input: &InputMatrix,
    targets: &Targets,
    options: GradCheckOptions,
) -> Result<GradCheckReport> {
    let graph = GraphInput::new(config, ahat, input)?;
    let trace = forward(params, config, &graph, Mode::Eval)?;
    let (loss, grads) = loss_and_gradients(params, config, &graph, targets, &trace, options.gradient)?;
    let floor = LOSS_SCALE_FLOOR * loss.abs().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let eps = options.epsilon;
    let mut tensors = Vec::new();

    let names = ["W0", "W1", "W2", "b2"];
    for (t, name) in names.iter().enumerate() {
        let len = params.tensors()[t].len();
        let picks = sample(&mut rng, len, options.coordinates.min(len));
        let mut worst: f64 = 0.0;
        let mut kinks = 0;
        for idx in picks.iter() {
            let mut plus = params.clone();
            plus.tensors_mut()[t][idx] += eps;
            let mut minus = params.clone();
            minus.tensors_mut()[t][idx] -= eps;
            let Some(numeric) = central(
                eval_loss(&plus, config, &graph, targets)?,
                eval_loss(&minus, config, &graph, targets)?,
                eps,
            ) else {
                kinks += 1;
                continue;
            };
            let analytic = grads.params.tensors()[t][idx];
            worst = worst.max(relative_error(analytic, numeric, floor));
        }
        tensors.push(TensorCheck {
            name: name.to_string(),
            coordinates: picks.len(),
            kinks_skipped: kinks,
            max_rel_error: worst,
        });
    }

    if let Some(dx) = &grads.input {
        let len = input.x.data().len();
        // always include label-block coordinates, where the masking matters
        let mut picks: Vec<usize> = sample(&mut rng, len, options.coordinates.min(len)).into_vec();
        let width = input.x.n_cols();
        for (k, &c) in input.mask.columns().iter().enumerate() {
            let row = (k * 7 + options.seed as usize) % input.x.n_rows().max(1);
            picks.push(row * width + c);
        }
        picks.sort_unstable();
        picks.dedup();
        let mut worst: f64 = 0.0;
        let mut kinks = 0;
        for &idx in &picks {
            let mut plus = input.clone();
            plus.x.data_mut()[idx] += eps;
            let mut minus = input.clone();
            minus.x.data_mut()[idx] -= eps;
            let lp = eval_loss(params, config, &GraphInput::new(config, ahat, &plus)?, targets)?;
            let lm = eval_loss(params, config, &GraphInput::new(config, ahat, &minus)?, targets)?;
            let Some(numeric) = central(lp, lm, eps) else {
                kinks += 1;
                continue;
            };
            worst = worst.max(relative_error(dx.data()[idx], numeric, floor));
        }
        tensors.push(TensorCheck {
            name: "X".into(),
            coordinates: picks.len(),
            kinks_skipped: kinks,
            max_rel_error: worst,
        });
    }

    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        tensors,
        max_rel_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AdjointKind;

    #[test]
    fn random_cases_pass_for_both_variants() {
        for seed in 0..40 {
            for masked in [true, false] {
                let report = random_case(20, masked, seed).unwrap().check(GradCheckOptions::default()).unwrap();
                assert!(report.passes(1e-6), "seed {seed} masked {masked}: {report:?}");
            }
        }
    }

    #[test]
    fn corrupted_adjoint_is_caught() {
        let case = random_case(20, true, 1).unwrap();
        let mut options = GradCheckOptions::default();
        options.gradient.adjoint = AdjointKind::Corrupted;
        let report = case.check(options).unwrap();
        assert!(!report.passes(1e-6));
        let x = report.tensors.iter().find(|t| t.name == "X").unwrap();
        assert!(x.max_rel_error > 1e-3);
    }

    #[test]
    fn relative_error_uses_the_floor() {
        assert_eq!(relative_error(0.0, 0.0, 0.0), 0.0);
        assert_eq!(relative_error(1e-9, 0.0, 1e-4), 1e-5);
        assert_eq!(relative_error(2.0, 1.0, 1e-4), 0.5);
    }
}
