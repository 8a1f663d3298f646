//! Graph convolutional networks for semi-supervised node classification,
//! with an optional label-aware first layer.
//!
//! A Label-GCN appends the known labels of some nodes to the input features
//! and, in the first convolution only, drops the self-loop for those label
//! columns. Each node then sees its neighbours' labels but never its own.

pub mod config;
pub mod data;
pub mod dense;
pub mod error;
pub mod metrics;
pub mod model;
pub mod sparse;
pub mod synthetic;
pub mod train;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use sparse::{LabelColumnMask, NormalizedAdjacency, SparseMatrix};
