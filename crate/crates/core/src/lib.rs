//! Network embedding by path-sampled sparsification of the truncated
//! personalized PageRank matrix, a neighbor-perspective re-weighting driven by
//! anonymous-walk similarity, and randomized SVD.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` and `*32` aliases below fix the precision.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dense;
pub mod error;
pub mod eval;
pub mod factorize;
pub mod generate;
pub mod graph;
pub mod mp;
pub mod oracle;
pub mod pattern;
pub mod pipeline;
pub mod scalar;
pub mod sparse;
pub mod sparsifier;

pub use config::PsneConfig;
pub use dense::DenseMatrix;
pub use error::{PsneError, Result};
pub use eval::{LabeledDataset, TrainOptions};
pub use factorize::EmbeddingMatrix;
pub use graph::{load_edge_list, load_labels, Graph, NodeLabels};
pub use pattern::{PatternTable, PatternWeights};
pub use pipeline::{embed_graph, EmbedOutput};
pub use scalar::Scalar;
pub use sparse::SparseMatrix;
pub use sparsifier::{build_sparsifier, SparsifierOutput};

pub type Graph64 = Graph<f64>;
pub type Graph32 = Graph<f32>;
pub type SparseMatrix64 = SparseMatrix<f64>;
pub type SparseMatrix32 = SparseMatrix<f32>;
pub type DenseMatrix64 = DenseMatrix<f64>;
pub type DenseMatrix32 = DenseMatrix<f32>;
pub type EmbeddingMatrix64 = EmbeddingMatrix<f64>;
pub type EmbeddingMatrix32 = EmbeddingMatrix<f32>;
pub type PatternWeights64 = PatternWeights<f64>;
pub type PatternWeights32 = PatternWeights<f32>;
