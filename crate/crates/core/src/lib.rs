//! Semi-supervised dimensionality reduction for partially and noisily
//! labeled multi-label data.
//!
//! The pipeline builds a neighborhood graph over the training samples,
//! propagates the (noisy) labels over it without clamping the labeled
//! points, and then learns an orthonormal projection that maximizes the
//! linear-kernel HSIC dependence between the projected features and the
//! propagated labels. Downstream, a semi-supervised ML-kNN classifier
//! (propagation on the embedding followed by ML-kNN) turns the embedding
//! into multi-label predictions.
//!
//! Module map:
//!
//! - [`graph`]: kNN / RBF adjacency, symmetric normalization, transition matrix.
//! - [`propagation`]: iterative and direct label propagation, hardening.
//! - [`projection`]: NMLSDR fit, MDDMp and PCA baselines, `transform`.
//! - [`classifier`]: ML-kNN and the two-step semi-supervised classifier.
//! - [`metrics`]: the seven multi-label evaluation measures.
//! - [`data`]: synthetic generator, noise injection, masking, IO.
//! - [`harness`]: experiment runner, result tables, Wilcoxon scoring.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod classifier;
pub mod config;
pub mod data;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod neighbors;
pub mod projection;
pub mod propagation;
pub mod sparse;

pub use crate::config::{EvalProtocol, GraphConfig, GraphKind, Method, NoiseConfig, PipelineConfig};
pub use crate::error::{Error, Result};

/// n×D real matrix, one sample per row.
pub type FeatureMatrix = nalgebra::DMatrix<f64>;

/// Binary label matrix (entries 0 or 1), one sample per row.
pub type BinaryMatrix = nalgebra::DMatrix<u8>;

pub(crate) fn to_real(labels: &BinaryMatrix) -> nalgebra::DMatrix<f64> {
    labels.map(f64::from)
}

pub(crate) fn check_binary(labels: &BinaryMatrix) -> Result<()> {
    match labels.iter().position(|&v| v > 1) {
        Some(pos) => Err(Error::invalid(format!(
            "label matrix is not binary (value {} at row {}, column {})",
            labels[pos],
            pos % labels.nrows(),
            pos / labels.nrows()
        ))),
        None => Ok(()),
    }
}
