//! Graph datasets, split sampling, and label-augmented input construction.

mod citation;
mod elliptic;

pub use citation::{load_citation, CitationLoad};
pub use elliptic::{load_elliptic, ILLICIT, LICIT};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::{build_adjacency, LabelColumnMask, SparseMatrix};

/// How labels are written into the trailing label block of the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LabelEncoding {
    /// One column per class.
    OneHot,
    /// A single column holding a fixed value per class; hidden or unknown
    /// labels are 0.
    ScalarMap(Vec<f64>),
}

impl LabelEncoding {
    pub fn n_cols(&self, n_classes: usize) -> usize {
        match self {
            LabelEncoding::OneHot => n_classes,
            LabelEncoding::ScalarMap(_) => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphDataset {
    pub name: String,
    pub node_ids: Vec<String>,
    pub features: DenseMatrix,
    pub labels: Vec<Option<usize>>,
    pub class_names: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub time_step: Option<Vec<u32>>,
    pub label_encoding: LabelEncoding,
    /// Class treated as positive for precision/recall, if any.
    pub positive_class: Option<usize>,
}

impl GraphDataset {
    /// Checks the structural invariants and returns the dataset unchanged.
    pub fn validated(self) -> Result<Self> {
        let n = self.labels.len();
        if self.features.n_rows() != n {
            return Err(Error::dims("GraphDataset", format!("{n} feature rows"), self.features.n_rows()));
        }
        if self.node_ids.len() != n {
            return Err(Error::dims("GraphDataset", format!("{n} node ids"), self.node_ids.len()));
        }
        let k = self.class_names.len();
        if let Some(bad) = self.labels.iter().flatten().find(|&&c| c >= k) {
            return Err(Error::InvalidArgument(format!("label {bad} outside 0..{k}")));
        }
        if let Some(t) = &self.time_step {
            if t.len() != n {
                return Err(Error::dims("GraphDataset", format!("{n} time steps"), t.len()));
            }
        }
        if let LabelEncoding::ScalarMap(values) = &self.label_encoding {
            if values.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "scalar label map has {} values for {k} classes",
                    values.len()
                )));
            }
        }
        if let Some(&(a, b)) = self.edges.iter().find(|&&(a, b)| a >= n || b >= n) {
            return Err(Error::NodeOutOfRange(a, b, n));
        }
        if self.positive_class.is_some_and(|c| c >= k) {
            return Err(Error::InvalidArgument("positive class out of range".into()));
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.features.n_cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn label_cols(&self) -> usize {
        self.label_encoding.n_cols(self.n_classes())
    }

    /// Node indices carrying a label, in ascending order.
    pub fn labeled_nodes(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|_| i))
            .collect()
    }

    pub fn adjacency(&self) -> Result<SparseMatrix> {
        build_adjacency(&self.edges, self.n())
    }

    /// Scales every feature row to unit L1 norm (rows of zeros stay zero).
    pub fn row_normalized(mut self) -> Self {
        let d = self.d();
        if d > 0 {
            for row in self.features.data_mut().chunks_exact_mut(d) {
                let s: f64 = row.iter().map(|v| v.abs()).sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|v| *v /= s);
                }
            }
        }
        self
    }

    /// The subgraph induced by `keep` (ascending node indices), with nodes
    /// renumbered densely in that order.
    pub fn induced(&self, keep: &[usize]) -> GraphDataset {
        let mut new_index = vec![usize::MAX; self.n()];
        for (k, &i) in keep.iter().enumerate() {
            new_index[i] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                let (na, nb) = (new_index[a], new_index[b]);
                (na != usize::MAX && nb != usize::MAX).then_some((na, nb))
            })
            .collect();
        GraphDataset {
            name: self.name.clone(),
            node_ids: keep.iter().map(|&i| self.node_ids[i].clone()).collect(),
            features: self.features.select_rows(keep),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            edges,
            time_step: self
                .time_step
                .as_ref()
                .map(|t| keep.iter().map(|&i| t[i]).collect()),
            label_encoding: self.label_encoding.clone(),
            positive_class: self.positive_class,
        }
    }
}

/// Requested sizes of the four disjoint sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub support: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.validation + self.test + self.support
    }
}

/// Four pairwise disjoint sets of labeled nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub support: Vec<usize>,
}

/// Draws a uniform random split of the labeled nodes.
pub fn sample_split(ds: &GraphDataset, sizes: SplitSizes, seed: u64) -> Result<SplitSpec> {
    let mut pool = ds.labeled_nodes();
    if sizes.total() > pool.len() {
        return Err(Error::InsufficientLabels {
            requested: sizes.total(),
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let mut rest = pool.into_iter();
    let mut take = |k: usize| -> Vec<usize> {
        let mut v: Vec<usize> = rest.by_ref().take(k).collect();
        v.sort_unstable();
        v
    };
    Ok(SplitSpec {
        train: take(sizes.train),
        validation: take(sizes.validation),
        test: take(sizes.test),
        support: take(sizes.support),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Training,
    Inference,
}

/// Nodes whose labels are written into the label block.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelVisibility {
    visible: Vec<usize>,
}

impl LabelVisibility {
    pub fn from_nodes(mut nodes: Vec<usize>) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        Self { visible: nodes }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.visible
    }

    pub fn len(&self) -> usize {
        self.visible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.visible.binary_search(&node).is_ok()
    }

    pub fn is_superset_of(&self, other: &LabelVisibility) -> bool {
        other.visible.iter().all(|&v| self.contains(v))
    }
}

/// Labels visible during `phase`.
///
/// The support set is permuted once per `seed` and a prefix of that
/// permutation is revealed, so larger fractions always reveal a superset.
pub fn visibility_for_phase(
    split: &SplitSpec,
    phase: Phase,
    support_fraction: f64,
    seed: u64,
) -> Result<LabelVisibility> {
    if !(0.0..=1.0).contains(&support_fraction) {
        return Err(Error::InvalidArgument(format!(
            "support fraction {support_fraction} outside [0, 1]"
        )));
    }
    let mut nodes: Vec<usize> = split.train.iter().chain(&split.validation).copied().collect();
    if phase == Phase::Inference {
        let mut order = split.support.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let k = (support_fraction * order.len() as f64).round() as usize;
        nodes.extend_from_slice(&order[..k.min(order.len())]);
    }
    Ok(LabelVisibility::from_nodes(nodes))
}

/// Feature matrix with its label block and the mask naming that block.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    pub x: DenseMatrix,
    pub mask: LabelColumnMask,
}

impl InputMatrix {
    pub fn n_cols(&self) -> usize {
        self.x.n_cols()
    }
}

/// `[features | label block]` with labels written only for visible nodes.
pub fn build_input(ds: &GraphDataset, vis: &LabelVisibility) -> InputMatrix {
    let d = ds.d();
    let k_cols = ds.label_cols();
    let width = d + k_cols;
    let mut x = DenseMatrix::zeros(ds.n(), width);
    for i in 0..ds.n() {
        x.row_mut(i)[..d].copy_from_slice(ds.features.row(i));
    }
    for &i in vis.nodes() {
        let Some(class) = ds.labels.get(i).copied().flatten() else {
            continue;
        };
        match &ds.label_encoding {
            LabelEncoding::OneHot => x.set(i, d + class, 1.0),
            LabelEncoding::ScalarMap(values) => x.set(i, d, values[class]),
        }
    }
    InputMatrix {
        x,
        mask: LabelColumnMask::trailing(width, k_cols),
    }
}

/// Raw features only, for the standard GCN baseline.
pub fn features_only(ds: &GraphDataset) -> InputMatrix {
    InputMatrix {
        x: ds.features.clone(),
        mask: LabelColumnMask::empty(),
    }
}
