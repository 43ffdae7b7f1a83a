//! Neighborhood graphs for label propagation.
//!
//! Both constructions exclude self-loops. Matrices are stored sparsely;
//! `to_dense` materializes the n×n contract form.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::neighbors::{all_knn, squared_distance, PointSet};
use crate::sparse::CsrMatrix;
use crate::{FeatureMatrix, GraphConfig, GraphKind};

/// Symmetric, non-negative adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix(CsrMatrix);

impl AdjacencyMatrix {
    pub fn new(matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid("adjacency matrix must be square"));
        }
        for i in 0..matrix.nrows() {
            for (_, v) in matrix.row(i) {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!("negative or non-finite weight in row {i}")));
                }
            }
        }
        if !matrix.is_symmetric(0.0) {
            return Err(Error::invalid("adjacency matrix must be symmetric"));
        }
        Ok(Self(matrix))
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(CsrMatrix::from_dense(m))
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.0.to_dense()
    }

    /// Number of neighbors (positive entries) per node.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.0.row(i).filter(|&(_, v)| v > 0.0).count()).collect()
    }

    /// First node without any positive edge, if any.
    pub fn isolated_node(&self) -> Option<usize> {
        self.0.row_sums().iter().position(|&s| !(s > 0.0))
    }
}

/// Row-stochastic transition matrix `T = D̃⁻¹ W̃`.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    matrix: CsrMatrix,
    /// Row sums of the symmetric matrix `T` was derived from; present when
    /// built through [`row_stochastic`], which lets solvers symmetrize.
    source_degrees: Option<Vec<f64>>,
}

impl TransitionMatrix {
    /// Wraps an arbitrary row-stochastic matrix (rows must sum to 1 within
    /// 1e-10, entries in [0, 1]).
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid("transition matrix must be square"));
        }
        for i in 0..m.nrows() {
            let row = m.row(i);
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::invalid(format!("row {i} has entries outside [0,1]")));
            }
            if (row.sum() - 1.0).abs() > 1e-10 {
                return Err(Error::invalid(format!("row {i} does not sum to 1")));
            }
        }
        Ok(Self {
            matrix: CsrMatrix::from_dense(m),
            source_degrees: None,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn source_degrees(&self) -> Option<&[f64]> {
        self.source_degrees.as_deref()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }
}

fn check_features(x: &FeatureMatrix) -> Result<()> {
    if x.nrows() < 2 {
        return Err(Error::invalid("graph construction needs at least two samples"));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite feature value at row {}, column {}",
            pos % x.nrows(),
            pos / x.nrows()
        )));
    }
    Ok(())
}

/// Fully connected Gaussian graph `W_ij = exp(-‖x_i - x_j‖² / σ²)`, zero diagonal.
pub fn rbf_adjacency(x: &FeatureMatrix, sigma: f64) -> Result<AdjacencyMatrix> {
    check_features(x)?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let n = x.nrows();
    let points = PointSet::from_matrix(x);
    let inv = 1.0 / (sigma * sigma);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(n - 1); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = (-inv * squared_distance(points.point(i), points.point(j))).exp();
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
    }
    AdjacencyMatrix::new(CsrMatrix::from_rows(n, rows))
}

/// Binary symmetrized kNN graph: `W_ij = 1` iff i is among j's k nearest
/// neighbors or j is among i's.
pub fn knn_adjacency(x: &FeatureMatrix, k: usize) -> Result<AdjacencyMatrix> {
    check_features(x)?;
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k must satisfy 1 <= k < n (k={k}, n={n})")));
    }
    let neighbors = all_knn(&PointSet::from_matrix(x), k);
    let mut rows: Vec<Vec<usize>> = vec![Vec::with_capacity(2 * k); n];
    for (i, list) in neighbors.iter().enumerate() {
        for &j in list {
            rows[i].push(j);
            rows[j].push(i);
        }
    }
    let rows = rows
        .into_iter()
        .map(|mut r| {
            r.sort_unstable();
            r.dedup();
            r.into_iter().map(|j| (j, 1.0)).collect()
        })
        .collect();
    AdjacencyMatrix::new(CsrMatrix::from_rows(n, rows))
}

/// Adjacency from a [`GraphConfig`].
pub fn build_adjacency(x: &FeatureMatrix, config: &GraphConfig) -> Result<AdjacencyMatrix> {
    match config.kind {
        GraphKind::Knn => knn_adjacency(x, config.k),
        GraphKind::Rbf => rbf_adjacency(x, config.sigma),
    }
}

/// `W̃ = D^{-1/2} W D^{-1/2}` with `d_ii` the row sums of `W`.
pub fn symmetric_normalize(w: &AdjacencyMatrix) -> Result<CsrMatrix> {
    if let Some(node) = w.isolated_node() {
        return Err(Error::DegenerateGraph { node });
    }
    let inv_sqrt: Vec<f64> = w.matrix().row_sums().iter().map(|d| 1.0 / d.sqrt()).collect();
    Ok(w.matrix().map_entries(|i, j, v| v * inv_sqrt[i] * inv_sqrt[j]))
}

/// `T = D̃⁻¹ W̃` with `d̃_ii` the row sums of `W̃`.
pub fn row_stochastic(w_tilde: &CsrMatrix) -> Result<TransitionMatrix> {
    if w_tilde.nrows() != w_tilde.ncols() {
        return Err(Error::invalid("normalized adjacency must be square"));
    }
    let sums = w_tilde.row_sums();
    if let Some(node) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateGraph { node });
    }
    let matrix = w_tilde.map_entries(|i, _, v| v / sums[i]);
    Ok(TransitionMatrix {
        matrix,
        source_degrees: Some(sums),
    })
}

/// Steps 1-3 in one call: adjacency, symmetric normalization, transition matrix.
pub fn transition_from_adjacency(w: &AdjacencyMatrix) -> Result<TransitionMatrix> {
    row_stochastic(&symmetric_normalize(w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, dim: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, dim, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn rbf_identical_points_have_unit_weight() {
        let x = DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 0.3, -1.0]);
        let w = rbf_adjacency(&x, 1.0).unwrap().to_dense();
        assert_eq!(w[(0, 1)], 1.0);
        assert_eq!(w[(0, 0)], 0.0);
    }

    #[test]
    fn rbf_unit_distance() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let w = rbf_adjacency(&x, 1.0).unwrap().to_dense();
        assert_abs_diff_eq!(w[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(w[(0, 1)], 0.36788, epsilon = 1e-5);
    }

    #[test]
    fn rbf_matches_pairwise_oracle() {
        let x = random_points(5, 3, 7);
        let sigma = 1.7;
        let w = rbf_adjacency(&x, sigma).unwrap().to_dense();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j {
                    0.0
                } else {
                    (-(x.row(i) - x.row(j)).norm_squared() / (sigma * sigma)).exp()
                };
                assert_abs_diff_eq!(w[(i, j)], expected, epsilon = 1e-14);
                assert_eq!(w[(i, j)], w[(j, i)]);
                if i != j {
                    assert!(w[(i, j)] > 0.0 && w[(i, j)] <= 1.0);
                }
            }
        }
    }

    #[test]
    fn rbf_rejects_bad_input() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, f64::NAN]);
        assert!(matches!(rbf_adjacency(&x, 1.0), Err(Error::InvalidInput(_))));
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(matches!(rbf_adjacency(&x, 0.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn knn_collinear_example() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        let w = knn_adjacency(&x, 1).unwrap().to_dense();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(w, expected);
    }

    #[test]
    fn knn_full_neighborhood_is_complete_graph() {
        let x = random_points(6, 2, 3);
        let w = knn_adjacency(&x, 5).unwrap().to_dense();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(w[(i, j)], if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn knn_degrees_against_brute_force() {
        let x = random_points(20, 4, 11);
        let w = knn_adjacency(&x, 5).unwrap();
        let dense = w.to_dense();
        // Brute-force kNN lists with the same (distance, index) ordering.
        let mut lists = Vec::new();
        for i in 0..20 {
            let mut c: Vec<(f64, usize)> = (0..20)
                .filter(|&j| j != i)
                .map(|j| ((x.row(i) - x.row(j)).norm_squared(), j))
                .collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            lists.push(c.into_iter().take(5).map(|p| p.1).collect::<Vec<_>>());
        }
        for i in 0..20 {
            for j in 0..20 {
                let expected = i != j && (lists[i].contains(&j) || lists[j].contains(&i));
                assert_eq!(dense[(i, j)] == 1.0, expected);
            }
        }
        for d in w.degrees() {
            assert!((5..=19).contains(&d));
        }
    }

    #[test]
    fn knn_rejects_k_out_of_range() {
        let x = random_points(4, 2, 1);
        assert!(matches!(knn_adjacency(&x, 4), Err(Error::InvalidInput(_))));
        assert!(matches!(knn_adjacency(&x, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn normalize_examples() {
        let w = AdjacencyMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(symmetric_normalize(&w).unwrap().to_dense(), w.to_dense());
        let w = AdjacencyMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0])).unwrap();
        let got = symmetric_normalize(&w).unwrap().to_dense();
        assert!((got - DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn isolated_node_is_an_error() {
        let w = AdjacencyMatrix::from_dense(&DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ))
        .unwrap();
        assert!(matches!(symmetric_normalize(&w), Err(Error::DegenerateGraph { node: 2 })));
        let zero_row = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert!(matches!(row_stochastic(&zero_row), Err(Error::DegenerateGraph { node: 1 })));
    }

    #[test]
    fn row_stochastic_examples() {
        let t = row_stochastic(&CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])))
            .unwrap()
            .to_dense();
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let tri = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let t = row_stochastic(&CsrMatrix::from_dense(&tri)).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t[(i, j)], if i == j { 0.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn normalized_spectral_radius_at_most_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = 8;
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v: f64 = rng.random_range(0.0..3.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let w = AdjacencyMatrix::from_dense(&m).unwrap();
            let wt = symmetric_normalize(&w).unwrap().to_dense();
            assert_abs_diff_eq!(wt.clone(), wt.transpose(), epsilon = 1e-15);
            let eig = wt.symmetric_eigenvalues();
            assert!(eig.iter().all(|e| e.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn damped_transition_is_convergent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..8 {
            let n = 10 + 5 * trial;
            let x = random_points(n, 3, trial as u64);
            let t = transition_from_adjacency(&knn_adjacency(&x, 3).unwrap()).unwrap();
            let dense = t.to_dense();
            for i in 0..n {
                assert_abs_diff_eq!(dense.row(i).sum(), 1.0, epsilon = 1e-12);
            }
            let rho = |m: &DMatrix<f64>| {
                m.clone()
                    .complex_eigenvalues()
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0f64, f64::max)
            };
            assert_abs_diff_eq!(rho(&dense), 1.0, epsilon = 1e-8);
            let alpha = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.random_range(0.0..0.999)));
            assert!(rho(&(alpha * &dense)) < 1.0);
        }
    }

    proptest! {
        #[test]
        fn knn_output_is_binary_symmetric_zero_diagonal(
            vals in proptest::collection::vec(-5.0f64..5.0, 2 * 15),
            k in 1usize..14,
        ) {
            let x = DMatrix::from_row_slice(15, 2, &vals);
            let w = knn_adjacency(&x, k).unwrap().to_dense();
            for i in 0..15 {
                prop_assert_eq!(w[(i, i)], 0.0);
                for j in 0..15 {
                    prop_assert!(w[(i, j)] == 0.0 || w[(i, j)] == 1.0);
                    prop_assert_eq!(w[(i, j)], w[(j, i)]);
                }
            }
        }

        #[test]
        fn rbf_is_permutation_equivariant(
            vals in proptest::collection::vec(-2.0f64..2.0, 2 * 6),
            shift in 1usize..6,
        ) {
            let x = DMatrix::from_row_slice(6, 2, &vals);
            let perm: Vec<usize> = (0..6).map(|i| (i + shift) % 6).collect();
            let xp = DMatrix::from_fn(6, 2, |i, j| x[(perm[i], j)]);
            let w = rbf_adjacency(&x, 1.3).unwrap().to_dense();
            let wp = rbf_adjacency(&xp, 1.3).unwrap().to_dense();
            for i in 0..6 {
                for j in 0..6 {
                    prop_assert!((wp[(i, j)] - w[(perm[i], perm[j])]).abs() < 1e-15);
                }
            }
        }

        #[test]
        fn transition_rows_sum_to_one(vals in proptest::collection::vec(0.0f64..1.0, 36)) {
            let mut m = DMatrix::from_row_slice(6, 6, &vals);
            m = (&m + m.transpose()) * 0.5;
            m.fill_diagonal(0.0);
            m.iter_mut().for_each(|v| *v += 1e-3);
            m.fill_diagonal(0.0);
            let t = transition_from_adjacency(&AdjacencyMatrix::from_dense(&m).unwrap()).unwrap().to_dense();
            for i in 0..6 {
                prop_assert!((t.row(i).sum() - 1.0).abs() < 1e-12);
                prop_assert!(t.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }
}
