//! Seeded random graphs for fixtures, gradient checks and smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{GraphDataset, LabelEncoding};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Erdős–Rényi edge list: each unordered pair is present with probability `p`.
pub fn random_edges(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// A homophilous graph with noisy bag-of-words features, in the spirit of a
/// small citation network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub n: usize,
    pub n_classes: usize,
    /// Expected number of same-class neighbours per node.
    pub intra_degree: f64,
    /// Expected number of other-class neighbours per node.
    pub inter_degree: f64,
    pub n_features: usize,
    /// Probability that a node's class-specific feature words are switched on.
    pub signal: f64,
    /// Probability that any other word is switched on.
    pub noise: f64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        Self {
            n: 600,
            n_classes: 4,
            intra_degree: 3.0,
            inter_degree: 1.0,
            n_features: 80,
            signal: 0.12,
            noise: 0.04,
        }
    }
}

impl PlantedPartition {
    pub fn generate(&self, seed: u64) -> Result<GraphDataset> {
        if self.n == 0 || self.n_classes == 0 || self.n_features < self.n_classes {
            return Err(Error::InvalidArgument(format!("bad planted partition {self:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..self.n).map(|_| rng.gen_range(0..self.n_classes)).collect();
        let per_class = self.n as f64 / self.n_classes as f64;
        let p_in = (self.intra_degree / per_class).min(1.0);
        let p_out = (self.inter_degree / (self.n as f64 - per_class).max(1.0)).min(1.0);
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let p = if labels[i] == labels[j] { p_in } else { p_out };
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let block = self.n_features / self.n_classes;
        let features = DenseMatrix::from_fn(self.n, self.n_features, |i, f| {
            let own = f / block == labels[i];
            let p = if own { self.signal } else { self.noise };
            if rng.gen::<f64>() < p {
                1.0
            } else {
                0.0
            }
        });
        GraphDataset {
            name: "synthetic".into(),
            node_ids: (0..self.n).map(|i| i.to_string()).collect(),
            features,
            labels: labels.into_iter().map(Some).collect(),
            class_names: (0..self.n_classes).map(|c| format!("class{c}")).collect(),
            edges,
            time_step: None,
            label_encoding: LabelEncoding::OneHot,
            positive_class: None,
        }
        .validated()
    }
}
