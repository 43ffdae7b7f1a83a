//! ML-kNN and the two-step semi-supervised classifier.
//!
//! ML-kNN estimates, per class, a prior and the distributions of "how many
//! of my k nearest training neighbors carry this class" given that the
//! sample does / does not carry it. Prediction applies Bayes' rule to the
//! neighbor count of the query.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::PartialLabelMatrix;
use crate::error::{Error, Result};
use crate::graph::{build_adjacency, transition_from_adjacency};
use crate::neighbors::{all_knn, query_knn, PointSet};
use crate::projection::{nmlsdr_fit, transform};
use crate::propagation::{assemble_f_tilde, harden, propagate_direct, AlphaSchedule, SoftLabelMatrix};
use crate::{check_binary, BinaryMatrix, FeatureMatrix, PipelineConfig};

const MODEL_VERSION: u32 = 1;

/// Trained ML-kNN model. Serialized as JSON with a `version` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlknnModel {
    pub version: u32,
    pub k: usize,
    pub s: f64,
    /// `P(H_c)`, length C.
    pub priors: Vec<f64>,
    /// `P(E_j | H_c)`, C×(k+1).
    pub cond: DMatrix<f64>,
    /// `P(E_j | ¬H_c)`, C×(k+1).
    pub cond_neg: DMatrix<f64>,
    pub train_embedding: DMatrix<f64>,
    pub train_labels: BinaryMatrix,
}

impl MlknnModel {
    pub fn classes(&self) -> usize {
        self.priors.len()
    }

    pub fn dim(&self) -> usize {
        self.train_embedding.ncols()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.version != MODEL_VERSION {
            return Err(Error::Data(format!("unsupported ML-kNN model version {}", model.version)));
        }
        Ok(model)
    }

    /// Posterior `P(H_c | E_j)` for neighbor count `j`, and the MAP decision.
    fn decide(&self, c: usize, j: usize) -> (u8, f64) {
        let a = self.priors[c] * self.cond[(c, j)];
        let b = (1.0 - self.priors[c]) * self.cond_neg[(c, j)];
        (u8::from(a > b), a / (a + b))
    }
}

fn count_matrix(neighbors: &[Vec<usize>], labels: &BinaryMatrix) -> Vec<Vec<usize>> {
    neighbors
        .iter()
        .map(|list| {
            (0..labels.ncols())
                .map(|c| list.iter().filter(|&&j| labels[(j, c)] == 1).count())
                .collect()
        })
        .collect()
}

/// Fits ML-kNN on embedded training data `z` (n×d) with binary labels `y`.
pub fn mlknn_train(z: &DMatrix<f64>, y: &BinaryMatrix, k: usize, s: f64) -> Result<MlknnModel> {
    let (n, classes) = y.shape();
    if z.nrows() != n {
        return Err(Error::invalid(format!("{} embedded rows but {n} label rows", z.nrows())));
    }
    if k == 0 || n <= k {
        return Err(Error::invalid(format!("ML-kNN needs 1 <= k < n (k={k}, n={n})")));
    }
    if !(s > 0.0) {
        return Err(Error::invalid(format!("smoothing s = {s} must be positive")));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in embedding"));
    }
    check_binary(y)?;

    let counts = count_matrix(&all_knn(&PointSet::from_matrix(z), k), y);
    let mut priors = Vec::with_capacity(classes);
    let mut cond = DMatrix::zeros(classes, k + 1);
    let mut cond_neg = DMatrix::zeros(classes, k + 1);
    for c in 0..classes {
        let positives = y.column(c).iter().filter(|&&v| v == 1).count();
        priors.push((s + positives as f64) / (2.0 * s + n as f64));
        let mut pos = vec![0usize; k + 1];
        let mut neg = vec![0usize; k + 1];
        for (i, row) in counts.iter().enumerate() {
            if y[(i, c)] == 1 {
                pos[row[c]] += 1;
            } else {
                neg[row[c]] += 1;
            }
        }
        let pos_total: usize = pos.iter().sum();
        let neg_total: usize = neg.iter().sum();
        for j in 0..=k {
            cond[(c, j)] = (s + pos[j] as f64) / (s * (k + 1) as f64 + pos_total as f64);
            cond_neg[(c, j)] = (s + neg[j] as f64) / (s * (k + 1) as f64 + neg_total as f64);
        }
    }
    Ok(MlknnModel {
        version: MODEL_VERSION,
        k,
        s,
        priors,
        cond,
        cond_neg,
        train_embedding: z.clone(),
        train_labels: y.clone(),
    })
}

/// Hard labels (strict MAP rule, ties give 0) and posterior scores for one query.
pub fn mlknn_predict(model: &MlknnModel, z: &[f64]) -> Result<(Vec<u8>, Vec<f64>)> {
    let points = PointSet::from_matrix(&model.train_embedding);
    predict_one(model, &points, z)
}

fn predict_one(model: &MlknnModel, points: &PointSet, z: &[f64]) -> Result<(Vec<u8>, Vec<f64>)> {
    if z.len() != model.dim() {
        return Err(Error::invalid(format!(
            "query has dimension {}, model expects {}",
            z.len(),
            model.dim()
        )));
    }
    let neighbors = query_knn(points, z, model.k);
    (0..model.classes())
        .map(|c| {
            let j = neighbors.iter().filter(|&&i| model.train_labels[(i, c)] == 1).count();
            Ok(model.decide(c, j))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

/// Row-wise [`mlknn_predict`] over an m×d matrix.
pub fn mlknn_predict_batch(model: &MlknnModel, z: &DMatrix<f64>) -> Result<(BinaryMatrix, DMatrix<f64>)> {
    let points = PointSet::from_matrix(&model.train_embedding);
    let m = z.nrows();
    let mut hard = BinaryMatrix::zeros(m, model.classes());
    let mut score = DMatrix::zeros(m, model.classes());
    let mut row = vec![0.0; z.ncols()];
    for i in 0..m {
        for (j, v) in row.iter_mut().enumerate() {
            *v = z[(i, j)];
        }
        let (h, s) = predict_one(model, &points, &row)?;
        hard.row_mut(i).copy_from(&DVector::from_vec(h).transpose());
        score.row_mut(i).copy_from(&DVector::from_vec(s).transpose());
    }
    Ok((hard, score))
}

/// Label propagation over the configured graph on `x`, with the labeled
/// block of `y_partial` first.
pub fn propagate_on(x: &FeatureMatrix, y_partial: &PartialLabelMatrix, config: &PipelineConfig) -> Result<SoftLabelMatrix> {
    let n = x.nrows();
    if y_partial.len() != n {
        return Err(Error::invalid(format!("{n} feature rows but {} label rows", y_partial.len())));
    }
    let t = transition_from_adjacency(&build_adjacency(x, &config.graph)?)?;
    let alpha = AlphaSchedule::split(n, y_partial.labeled(), config.alpha_labeled, config.alpha_unlabeled)?;
    propagate_direct(&t, y_partial.initial(), &alpha)
}

/// Second step of the semi-supervised classifier: propagate the partial
/// labels over a graph on the embedding, harden, train ML-kNN on the now
/// fully labeled training set and predict the test embedding.
pub fn classify_embedded(
    z_train: &DMatrix<f64>,
    y_partial: &PartialLabelMatrix,
    z_test: &DMatrix<f64>,
    config: &PipelineConfig,
) -> Result<(BinaryMatrix, DMatrix<f64>)> {
    let f = propagate_on(z_train, y_partial, config)?;
    let y_full = harden(&f, 0.5);
    let model = mlknn_train(z_train, &y_full, config.mlknn_k, config.mlknn_smoothing)?;
    mlknn_predict_batch(&model, z_test)
}

/// NMLSDR embedding followed by [`classify_embedded`]. Rows of `x_train`
/// must be in the canonical order of `y_partial` (labeled first).
pub fn semi_supervised_classify(
    x_train: &FeatureMatrix,
    y_partial: &PartialLabelMatrix,
    x_test: &FeatureMatrix,
    config: &PipelineConfig,
) -> Result<(BinaryMatrix, DMatrix<f64>)> {
    if y_partial.labeled() == 0 {
        return Err(Error::invalid("semi-supervised classification needs at least one labeled sample"));
    }
    if x_train.ncols() != x_test.ncols() {
        return Err(Error::invalid("train and test feature dimensions differ"));
    }
    let classes = y_partial.initial().ncols();
    let d = config.d.unwrap_or(classes);
    let f = propagate_on(x_train, y_partial, config)?;
    let f_tilde = assemble_f_tilde(&f, y_partial.labeled())?;
    let p = nmlsdr_fit(x_train, &f_tilde, d)?;
    classify_embedded(&transform(&p, x_train)?, y_partial, &transform(&p, x_test)?, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(points.len(), 1, points)
    }

    #[test]
    fn prior_with_no_positives() {
        let z = line(&(0..10).map(f64::from).collect::<Vec<_>>());
        let y = BinaryMatrix::zeros(10, 1);
        let m = mlknn_train(&z, &y, 3, 1.0).unwrap();
        assert_abs_diff_eq!(m.priors[0], 1.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn tables_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = DMatrix::from_fn(40, 2, |_, _| rng.random::<f64>());
        let y = BinaryMatrix::from_fn(40, 3, |_, _| u8::from(rng.random_bool(0.4)));
        let m = mlknn_train(&z, &y, 5, 1.0).unwrap();
        for c in 0..3 {
            assert!(m.priors[c] > 0.0 && m.priors[c] < 1.0);
            assert_abs_diff_eq!(m.cond.row(c).sum(), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(m.cond_neg.row(c).sum(), 1.0, epsilon = 1e-10);
            assert!(m.cond.row(c).iter().chain(m.cond_neg.row(c).iter()).all(|&v| v > 0.0));
        }
        assert!(mlknn_train(&z, &y, 40, 1.0).is_err());
    }

    // Independent counting oracle: explicit sort of all distances per point.
    fn oracle_counts(z: &[f64], y: &[u8], k: usize) -> Vec<usize> {
        (0..z.len())
            .map(|i| {
                let mut others: Vec<(f64, usize)> =
                    (0..z.len()).filter(|&j| j != i).map(|j| ((z[i] - z[j]).powi(2), j)).collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others[..k].iter().filter(|(_, j)| y[*j] == 1).count()
            })
            .collect()
    }

    #[test]
    fn counting_matches_oracle_on_small_instance() {
        // Six points, one class, with a distance tie at point 2.
        let z = [0.0, 1.0, 2.0, 3.0, 7.0, 8.0];
        let y = [1u8, 1, 0, 1, 0, 0];
        let k = 2;
        let counts = oracle_counts(&z, &y, k);
        let m = mlknn_train(&line(&z), &BinaryMatrix::from_column_slice(6, 1, &y), k, 1.0).unwrap();
        let (mut pos, mut neg) = (vec![0.0; k + 1], vec![0.0; k + 1]);
        for i in 0..6 {
            if y[i] == 1 {
                pos[counts[i]] += 1.0;
            } else {
                neg[counts[i]] += 1.0;
            }
        }
        for j in 0..=k {
            assert_abs_diff_eq!(m.cond[(0, j)], (1.0 + pos[j]) / (3.0 + 3.0), epsilon = 1e-15);
            assert_abs_diff_eq!(m.cond_neg[(0, j)], (1.0 + neg[j]) / (3.0 + 3.0), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(m.priors[0], 4.0 / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn separated_clusters_concentrate_on_full_count() {
        let z = line(&[0.0, 0.1, 0.2, 0.3, 10.0, 10.1, 10.2, 10.3]);
        let y = BinaryMatrix::from_row_slice(8, 2, &[1, 0, 1, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0, 1]);
        let m = mlknn_train(&z, &y, 3, 1.0).unwrap();
        for c in 0..2 {
            let best = (0..=3).max_by(|&a, &b| m.cond[(c, a)].total_cmp(&m.cond[(c, b)])).unwrap();
            assert_eq!(best, 3);
            // All four positives see 3 positive neighbors: (1+4)/(4+4).
            assert_abs_diff_eq!(m.cond[(c, 3)], 5.0 / 8.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn bayes_rule_by_hand() {
        // Same 8-point instance; query at a training point of cluster 0.
        let z = line(&[0.0, 0.1, 0.2, 0.3, 10.0, 10.1, 10.2, 10.3]);
        let y = BinaryMatrix::from_row_slice(8, 2, &[1, 0, 1, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0, 1]);
        let m = mlknn_train(&z, &y, 3, 1.0).unwrap();
        let (hard, score) = mlknn_predict(&m, &[0.1]).unwrap();
        assert_eq!(hard, vec![1, 0]);
        // Class 0, j = 3: prior 5/10, P(E_3|H) = 5/8, P(E_3|¬H) = 1/8.
        let a = 0.5 * 5.0 / 8.0;
        let b = 0.5 * 1.0 / 8.0;
        assert_abs_diff_eq!(score[0], a / (a + b), epsilon = 1e-15);
        // Class 1, j = 0: P(E_0|H) = 1/8, P(E_0|¬H) = 5/8.
        assert_abs_diff_eq!(score[1], b / (a + b), epsilon = 1e-15);
        assert!(mlknn_predict(&m, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn exact_tie_is_negative() {
        let z = line(&[0.0, 1.0, 2.0, 3.0]);
        let y = BinaryMatrix::from_column_slice(4, 1, &[1, 0, 1, 0]);
        let mut m = mlknn_train(&z, &y, 1, 1.0).unwrap();
        m.priors[0] = 0.5;
        m.cond.fill(0.5);
        m.cond_neg.fill(0.5);
        let (hard, score) = mlknn_predict(&m, &[0.0]).unwrap();
        assert_eq!((hard[0], score[0]), (0, 0.5));
    }

    #[test]
    fn json_round_trip() {
        let z = line(&[0.0, 1.0, 2.0, 5.0]);
        let y = BinaryMatrix::from_column_slice(4, 1, &[1, 1, 0, 0]);
        let m = mlknn_train(&z, &y, 2, 1.0).unwrap();
        assert_eq!(MlknnModel::from_json(&m.to_json().unwrap()).unwrap(), m);
        let bumped = m.to_json().unwrap().replace("\"version\":1", "\"version\":9");
        assert!(MlknnModel::from_json(&bumped).is_err());
    }

    fn clusters(rng: &mut ChaCha8Rng, per: usize) -> (FeatureMatrix, BinaryMatrix) {
        let centers = [[0.0, 0.0, 0.0, 0.0], [8.0, 0.0, 0.0, 0.0], [0.0, 8.0, 0.0, 0.0]];
        let n = per * 3;
        let x = FeatureMatrix::from_fn(n, 4, |i, j| centers[i % 3][j] + rng.random::<f64>() - 0.5);
        let y = BinaryMatrix::from_fn(n, 3, |i, c| u8::from(i % 3 == c));
        (x, y)
    }

    #[test]
    fn three_class_toy_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (x_train, y_train) = clusters(&mut rng, 40);
        let (x_test, y_test) = clusters(&mut rng, 20);
        let partial = PartialLabelMatrix::from_canonical(y_train, 120).unwrap();
        let config = PipelineConfig {
            d: Some(2),
            ..Default::default()
        };
        let (hard, score) = semi_supervised_classify(&x_train, &partial, &x_test, &config).unwrap();
        let exact = (0..60).filter(|&i| hard.row(i) == y_test.row(i)).count();
        assert!(exact as f64 / 60.0 > 0.95, "subset accuracy {exact}/60");
        assert!(score.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }

    proptest! {
        #[test]
        fn scores_bounded_monotone_and_consistent(seed in 0u64..500, k in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 12;
            let z = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
            let y = BinaryMatrix::from_fn(n, 2, |_, _| u8::from(rng.random_bool(0.5)));
            let mut m = mlknn_train(&z, &y, k, 1.0).unwrap();
            // Impose a monotone likelihood ratio on class 0.
            for j in 0..=k {
                m.cond[(0, j)] = (j + 1) as f64;
                m.cond_neg[(0, j)] = (k + 1 - j) as f64;
            }
            let mut last = 0.0;
            for j in 0..=k {
                let (h, s) = m.decide(0, j);
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert!(s >= last);
                prop_assert_eq!(h == 1, s > 0.5);
                last = s;
            }
            let (h, s) = mlknn_predict(&m, &[rng.random(), rng.random()]).unwrap();
            for c in 0..2 {
                prop_assert!((0.0..=1.0).contains(&s[c]));
                prop_assert_eq!(h[c] == 1, s[c] > 0.5);
            }
        }
    }
}
