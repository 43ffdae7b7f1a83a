//! Datasets, label noise, masking and standardization.
//!
//! Randomness comes from ChaCha8 seeded with the caller's `u64` seed, with
//! a fixed stream id per operation (see [`stream`]), so each operation
//! draws from an independent, platform-stable sequence.

pub(crate) mod io;
mod synthetic;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{check_binary, BinaryMatrix, FeatureMatrix};

pub use io::{load_dataset, read_bundle, write_bundle, BundleManifest, FileFormat, LabelPosition, SplitEntry};
pub use synthetic::{generate_synthetic, SYNTHETIC_CLASSES, SYNTHETIC_DIM, SYNTHETIC_SAMPLES, SYNTHETIC_TEST};

/// ChaCha stream ids, one per random operation.
pub mod stream {
    pub const SYNTHETIC: u64 = 1;
    pub const FLIP: u64 = 2;
    pub const MASK: u64 = 3;
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelDataset {
    pub features: FeatureMatrix,
    pub labels: BinaryMatrix,
    /// Labeled flag per sample; labeled rows come first once canonicalized.
    pub labeled: Vec<bool>,
    pub feature_names: Option<Vec<String>>,
    pub label_names: Option<Vec<String>>,
    pub split: Split,
}

impl MultiLabelDataset {
    /// A fully labeled dataset.
    pub fn new(features: FeatureMatrix, labels: BinaryMatrix, split: Split) -> Result<Self> {
        if features.nrows() != labels.nrows() {
            return Err(Error::Data(format!(
                "{} feature rows but {} label rows",
                features.nrows(),
                labels.nrows()
            )));
        }
        check_binary(&labels)?;
        let n = features.nrows();
        Ok(Self {
            features,
            labels,
            labeled: vec![true; n],
            feature_names: None,
            label_names: None,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn classes(&self) -> usize {
        self.labels.ncols()
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled.iter().filter(|&&l| l).count()
    }

    /// Average number of relevant labels per sample.
    pub fn cardinality(&self) -> f64 {
        self.labels.iter().map(|&v| v as f64).sum::<f64>() / self.len() as f64
    }

    /// Rows in the given order (indices may repeat or be a subset).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: select_rows(&self.features, rows),
            labels: select_rows(&self.labels, rows),
            labeled: rows.iter().map(|&i| self.labeled[i]).collect(),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
            split: self.split,
        }
    }
}

pub(crate) fn select_rows<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>, rows: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Labels visible to the learner: the first `labeled` rows carry (noisy)
/// labels, the rest are all-zero as required for the propagation start.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialLabelMatrix {
    initial: BinaryMatrix,
    labeled: usize,
    order: Vec<usize>,
}

impl PartialLabelMatrix {
    /// From already-canonical labels: rows `labeled..` are zeroed.
    pub fn from_canonical(mut labels: BinaryMatrix, labeled: usize) -> Result<Self> {
        check_binary(&labels)?;
        if labeled > labels.nrows() {
            return Err(Error::invalid("labeled count exceeds number of rows"));
        }
        let n = labels.nrows();
        for i in labeled..n {
            labels.row_mut(i).fill(0);
        }
        Ok(Self {
            initial: labels,
            labeled,
            order: (0..n).collect(),
        })
    }

    /// Propagation initializer `Y(0)` (n×C).
    pub fn initial(&self) -> &BinaryMatrix {
        &self.initial
    }

    pub fn labeled(&self) -> usize {
        self.labeled
    }

    pub fn len(&self) -> usize {
        self.initial.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.nrows() == 0
    }

    /// Canonical row `i` is original row `order()[i]`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// The (noisy) labels of the labeled block.
    pub fn labeled_rows(&self) -> BinaryMatrix {
        self.initial.rows(0, self.labeled).into_owned()
    }
}

fn round_count(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64).round() as usize).min(total)
}

/// Inverts exactly `round(p·n·C)` distinct cells chosen uniformly.
pub fn flip_labels(y: &BinaryMatrix, p: f64, seed: u64) -> Result<BinaryMatrix> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("flip fraction {p} must lie in [0, 1)")));
    }
    check_binary(y)?;
    let cells = y.len();
    let count = round_count(p, cells);
    let mut out = y.clone();
    if count == 0 {
        return Ok(out);
    }
    let mut rng = rng_for(seed, stream::FLIP);
    for idx in rand::seq::index::sample(&mut rng, cells, count) {
        // Column-major linear index.
        out[idx] = 1 - out[idx];
    }
    Ok(out)
}

/// Marks `round((1-f)·n)` uniformly chosen samples as unlabeled and
/// reorders rows labeled-first (relative order kept within each group).
pub fn mask_labels(y: &BinaryMatrix, labeled_fraction: f64, seed: u64) -> Result<PartialLabelMatrix> {
    if !(labeled_fraction > 0.0 && labeled_fraction <= 1.0) {
        return Err(Error::invalid(format!("labeled fraction {labeled_fraction} must lie in (0, 1]")));
    }
    check_binary(y)?;
    let n = y.nrows();
    let hidden = round_count(1.0 - labeled_fraction, n);
    let mut is_hidden = vec![false; n];
    if hidden > 0 {
        let mut rng = rng_for(seed, stream::MASK);
        for i in rand::seq::index::sample(&mut rng, n, hidden) {
            is_hidden[i] = true;
        }
    }
    let order: Vec<usize> = (0..n).filter(|&i| !is_hidden[i]).chain((0..n).filter(|&i| is_hidden[i])).collect();
    let labeled = n - hidden;
    let mut initial = select_rows(y, &order);
    for i in labeled..n {
        initial.row_mut(i).fill(0);
    }
    Ok(PartialLabelMatrix {
        initial,
        labeled,
        order,
    })
}

/// Per-feature statistics computed on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Features with a standard deviation below this are centered only.
    pub const MIN_STD: f64 = 1e-12;

    pub fn fit(train: &FeatureMatrix) -> Result<Self> {
        let n = train.nrows();
        if n == 0 {
            return Err(Error::invalid("cannot standardize an empty training set"));
        }
        let mean: Vec<f64> = train.column_iter().map(|c| c.mean()).collect();
        let std = train
            .column_iter()
            .zip(&mean)
            .map(|(c, m)| (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt())
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.ncols() != self.mean.len() {
            return Err(Error::invalid("feature count differs from the standardization statistics"));
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let scale = if self.std[j] < Self::MIN_STD { 1.0 } else { self.std[j] };
            col.apply(|v| *v = (*v - self.mean[j]) / scale);
        }
        Ok(out)
    }
}

/// Zero mean, unit (population) standard deviation using training statistics only.
pub fn standardize(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
) -> Result<(FeatureMatrix, FeatureMatrix, Vec<f64>, Vec<f64>)> {
    let stats = Standardization::fit(train)?;
    let a = stats.apply(train)?;
    let b = stats.apply(test)?;
    Ok((a, b, stats.mean, stats.std))
}
