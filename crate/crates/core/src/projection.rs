//! Orthonormal projections maximizing feature-label dependence.
//!
//! With a linear kernel on the projected features and `L = F̃ F̃ᵀ` on the
//! labels, the (unnormalized) HSIC objective is `tr(Pᵀ M P)` with
//! `M = Xᵀ H F̃ F̃ᵀ H X`. The maximizer over orthonormal `P` is spanned by
//! the top-d eigenvectors of `M`. Since `M = BᵀB` for the C×D factor
//! `B = F̃ᵀ H X`, the eigenvectors are the right singular vectors of `B`,
//! which avoids forming the D×D matrix when `D > C`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::DenoisedLabels;
use crate::{check_binary, to_real, BinaryMatrix, FeatureMatrix};

/// Eigenvalues at or below this fraction of the largest one count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// D×d matrix with orthonormal columns and the eigenvalues it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    numerical_rank: usize,
}

impl Projection {
    /// Validates orthonormality (within 1e-10) and eigenvalue ordering.
    pub fn new(basis: DMatrix<f64>, eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.len() != basis.ncols() {
            return Err(Error::invalid("one eigenvalue per projection column required"));
        }
        if eigenvalues.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("eigenvalues must be finite and non-negative"));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("eigenvalues must be sorted in descending order"));
        }
        let gram = basis.transpose() * &basis;
        if (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax() > 1e-10 {
            return Err(Error::invalid("projection columns are not orthonormal"));
        }
        let numerical_rank = count_rank(&eigenvalues);
        Ok(Self {
            basis,
            eigenvalues,
            numerical_rank,
        })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Number of columns with a non-negligible eigenvalue.
    pub fn numerical_rank(&self) -> usize {
        self.numerical_rank
    }

    /// True when trailing columns were completed deterministically from a
    /// (near-)null space.
    pub fn is_rank_deficient(&self) -> bool {
        self.numerical_rank < self.output_dim()
    }

    pub fn objective_value(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

fn count_rank(values: &[f64]) -> usize {
    count_rank_above(values, f64::MIN_POSITIVE)
}

fn count_rank_above(values: &[f64], floor: f64) -> usize {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let cutoff = (max * RANK_TOLERANCE).max(floor);
    values.iter().filter(|&&v| v > cutoff).count()
}

/// The centering operator `H = I - n⁻¹ 1 1ᵀ`, applied as column-mean subtraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CenteringOperator {
    n: usize,
}

impl CenteringOperator {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    /// `H A` for an n-row matrix `A`.
    pub fn apply(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), self.n, "centering operator dimension mismatch");
        let mut out = a.clone();
        for mut col in out.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        out
    }

    /// Dense n×n materialization (tests and small problems only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let inv = 1.0 / self.n as f64;
        DMatrix::from_fn(self.n, self.n, |i, j| if i == j { 1.0 - inv } else { -inv })
    }
}

/// How the dominant eigenvectors of `M` are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolvePath {
    /// Factorized when `D > C`, dense otherwise.
    #[default]
    Auto,
    /// Right singular vectors of the C×D factor `B = F̃ᵀ H X`.
    Factorized,
    /// Symmetric eigendecomposition of the explicit D×D matrix `M = BᵀB`.
    DenseGram,
}

/// `B = F̃ᵀ H X` (C×D).
pub fn label_feature_factor(x: &FeatureMatrix, labels: &DMatrix<f64>) -> DMatrix<f64> {
    labels.transpose() * CenteringOperator::new(x.nrows()).apply(x)
}

/// `M = Xᵀ H F̃ F̃ᵀ H X` (D×D).
pub fn dependence_matrix(x: &FeatureMatrix, labels: &DMatrix<f64>) -> DMatrix<f64> {
    let b = label_feature_factor(x, labels);
    b.transpose() * b
}

/// `tr(Pᵀ M P)`.
pub fn objective(p: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    (p.transpose() * m * p).trace()
}

/// NMLSDR: top-d eigenvectors of `Xᵀ H F̃ F̃ᵀ H X`.
pub fn nmlsdr_fit(x: &FeatureMatrix, f_tilde: &DenoisedLabels, d: usize) -> Result<Projection> {
    nmlsdr_fit_with(x, f_tilde, d, SolvePath::Auto)
}

pub fn nmlsdr_fit_with(
    x: &FeatureMatrix,
    f_tilde: &DenoisedLabels,
    d: usize,
    path: SolvePath,
) -> Result<Projection> {
    dependence_fit(x, f_tilde.matrix(), d, path)
}

/// MDDMp: the same dependence maximization using the given labels of the
/// labeled subset only.
pub fn mddmp_fit(x_labeled: &FeatureMatrix, y_labeled: &BinaryMatrix, d: usize) -> Result<Projection> {
    if x_labeled.nrows() == 0 {
        return Err(Error::invalid("MDDMp needs at least one labeled sample"));
    }
    check_binary(y_labeled)?;
    dependence_fit(x_labeled, &to_real(y_labeled), d, SolvePath::Auto)
}

/// Dependence maximization for an arbitrary real label-kernel factor.
pub fn dependence_fit(
    x: &FeatureMatrix,
    labels: &DMatrix<f64>,
    d: usize,
    path: SolvePath,
) -> Result<Projection> {
    let (n, dim) = x.shape();
    let classes = labels.ncols();
    if labels.nrows() != n {
        return Err(Error::invalid(format!(
            "feature rows ({n}) and label rows ({}) differ",
            labels.nrows()
        )));
    }
    if n < 2 {
        return Err(Error::invalid("dependence maximization needs at least two samples"));
    }
    if d == 0 || d > classes.min(dim) {
        return Err(Error::invalid(format!(
            "target dimension d = {d} must satisfy 1 <= d <= min(C, D) = {}",
            classes.min(dim)
        )));
    }
    if x.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in features or labels"));
    }
    let b = label_feature_factor(x, labels);
    let factorized = match path {
        SolvePath::Auto => dim > classes,
        SolvePath::Factorized => true,
        SolvePath::DenseGram => false,
    };
    let (vectors, values) = if factorized {
        let svd = SVD::new(b.transpose(), true, false);
        let u = svd
            .u
            .ok_or_else(|| Error::Numeric("singular value decomposition failed".into()))?;
        let values = svd.singular_values.iter().map(|s| s * s).collect::<Vec<_>>();
        (u, values)
    } else {
        let eig = SymmetricEigen::new(b.transpose() * &b);
        (eig.eigenvectors, eig.eigenvalues.iter().copied().collect())
    };
    // Rounding noise in B is about eps * |F̃| * |HX|; eigenvalues below the
    // square of a generous multiple of that are treated as zero.
    let scale = labels.norm_squared() * CenteringOperator::new(n).apply(x).norm_squared();
    let p = top_eigenpairs(&vectors, &values, d, dim, scale * 1e-20);
    if p.is_rank_deficient() {
        log::warn!(
            "dependence matrix has numerical rank {} < d = {d}; trailing directions completed deterministically",
            p.numerical_rank()
        );
    }
    Ok(p)
}

/// Principal component baseline: top-d eigenvectors of the sample covariance.
pub fn pca_fit(x: &FeatureMatrix, d: usize) -> Result<Projection> {
    let (n, dim) = x.shape();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two samples"));
    }
    if d == 0 || d > dim {
        return Err(Error::invalid(format!("PCA dimension d = {d} must satisfy 1 <= d <= D = {dim}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    let centered = CenteringOperator::new(n).apply(x);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let scale = centered.norm_squared() / (n as f64 - 1.0);
    Ok(top_eigenpairs(&eig.eigenvectors, &values, d, dim, scale * 1e-20))
}

/// Sorts candidate eigenpairs, keeps the top `d` with a fixed sign
/// convention and completes any rank-deficient tail from the standard basis.
fn top_eigenpairs(vectors: &DMatrix<f64>, values: &[f64], d: usize, dim: usize, floor: f64) -> Projection {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let clamped: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    let rank = count_rank_above(&clamped, floor.max(f64::MIN_POSITIVE)).min(d);

    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, &i) in order.iter().take(rank).enumerate() {
        columns.push(orient(vectors.column(i).into_owned()));
        eigenvalues.push(clamped[k]);
    }
    let mut candidate = 0;
    while columns.len() < d && candidate < dim {
        let mut v = DVector::zeros(dim);
        v[candidate] = 1.0;
        candidate += 1;
        // Two Gram-Schmidt passes for numerical orthogonality.
        for _ in 0..2 {
            for c in &columns {
                let dot = c.dot(&v);
                v.axpy(-dot, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            columns.push(orient(v / norm));
            eigenvalues.push(0.0);
        }
    }
    let basis = DMatrix::from_columns(&columns);
    Projection {
        basis,
        eigenvalues,
        numerical_rank: rank,
    }
}

/// Flips the sign so the largest-magnitude entry (lowest index on ties) is positive.
fn orient(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

/// `Z = X P` (rows are samples).
pub fn transform(p: &Projection, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
    if x.ncols() != p.input_dim() {
        return Err(Error::invalid(format!(
            "feature dimension {} does not match projection input dimension {}",
            x.ncols(),
            p.input_dim()
        )));
    }
    Ok(x * p.basis())
}

/// Fit provenance stored next to a serialized projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub method: String,
    pub hyper_parameters: BTreeMap<String, serde_json::Value>,
    pub seed: Option<u64>,
}

const MAGIC: &[u8; 4] = b"NMLP";
const FORMAT_VERSION: u32 = 1;

/// Path of the JSON sidecar for a projection file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Projection {
    /// Binary layout, little-endian: `b"NMLP"`, `u32` version, `u64` D,
    /// `u64` d, d `f64` eigenvalues, then the D×d coefficients in
    /// column-major order. Metadata goes to `<path>.json`.
    pub fn save(&self, path: &Path, metadata: &FitMetadata) -> Result<()> {
        let mut buf = Vec::with_capacity(24 + 8 * (self.eigenvalues.len() + self.basis.len()));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.input_dim() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.output_dim() as u64).to_le_bytes());
        for v in self.eigenvalues.iter().chain(self.basis.as_slice()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::File::create(path)?.write_all(&buf)?;
        let json = serde_json::to_string_pretty(metadata)?;
        fs::write(sidecar_path(path), json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, FitMetadata)> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = |m: &str| Error::Data(format!("{}: {m}", path.display()));
        if bytes.len() < 24 || &bytes[..4] != MAGIC {
            return Err(bad("not a projection file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let expected = 24 + 8 * (d + dim * d);
        if bytes.len() != expected {
            return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let floats: Vec<f64> = bytes[24..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let eigenvalues = floats[..d].to_vec();
        let basis = DMatrix::from_column_slice(dim, d, &floats[d..]);
        let metadata: FitMetadata = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
        let numerical_rank = count_rank(&eigenvalues);
        Ok((
            Projection {
                basis,
                eigenvalues,
                numerical_rank,
            },
            metadata,
        ))
    }
}
