//! One experiment cell: noise → masking → standardization → fit → classify → evaluate.

use nalgebra::DMatrix;

use crate::classifier::{classify_embedded, mlknn_predict_batch, mlknn_train, propagate_on};
use crate::data::{flip_labels, mask_labels, select_rows, standardize, MultiLabelDataset, PartialLabelMatrix};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_all, MetricsReport};
use crate::projection::{mddmp_fit, nmlsdr_fit, pca_fit, transform, Projection};
use crate::propagation::assemble_f_tilde;
use crate::{BinaryMatrix, EvalProtocol, FeatureMatrix, Method, PipelineConfig};

/// Everything a run produces besides the metrics, for inspection and dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: MetricsReport,
    pub projection: Projection,
    pub test_embedding: DMatrix<f64>,
    pub test_hard: BinaryMatrix,
    pub test_score: DMatrix<f64>,
}

/// Runs one cell and returns its test-split metrics.
pub fn run_experiment(
    config: &PipelineConfig,
    train: &MultiLabelDataset,
    test: &MultiLabelDataset,
) -> Result<MetricsReport> {
    run_experiment_detailed(config, train, test).map(|o| o.report)
}

/// As [`run_experiment`]; failures are wrapped with the config snapshot.
pub fn run_experiment_detailed(
    config: &PipelineConfig,
    train: &MultiLabelDataset,
    test: &MultiLabelDataset,
) -> Result<ExperimentOutput> {
    run_inner(config, train, test).map_err(|e| Error::Experiment {
        config: config.to_json(),
        source: Box::new(e),
    })
}

fn fit(config: &PipelineConfig, x: &FeatureMatrix, partial: &PartialLabelMatrix, d: usize) -> Result<Projection> {
    match config.method {
        Method::Nmlsdr => {
            let f = propagate_on(x, partial, config)?;
            nmlsdr_fit(x, &assemble_f_tilde(&f, partial.labeled())?, d)
        }
        Method::Mddmp => mddmp_fit(&x.rows(0, partial.labeled()).into_owned(), &partial.labeled_rows(), d),
        Method::Pca => pca_fit(x, d),
    }
}

fn run_inner(config: &PipelineConfig, train: &MultiLabelDataset, test: &MultiLabelDataset) -> Result<ExperimentOutput> {
    let classes = train.classes();
    config.validate(Some(classes))?;
    if test.classes() != classes || test.dim() != train.dim() {
        return Err(Error::Data("train and test splits have different shapes".into()));
    }
    let noisy = flip_labels(&train.labels, config.noise.flip_fraction, config.seed)?;
    let partial = mask_labels(&noisy, config.noise.labeled_fraction, config.seed)?;
    let x_ordered = select_rows(&train.features, partial.order());
    let (x_train, x_test, _, _) = standardize(&x_ordered, &test.features)?;

    let d = match config.method {
        Method::Pca => config.d.unwrap_or(classes).min(train.dim()),
        _ => config.d.unwrap_or(classes),
    };
    let projection = fit(config, &x_train, &partial, d)?;
    let z_train = transform(&projection, &x_train)?;
    let z_test = transform(&projection, &x_test)?;

    let (test_hard, test_score) = match (config.eval, config.method) {
        (EvalProtocol::Supervised, _) => {
            let y_true = select_rows(&train.labels, partial.order());
            let model = mlknn_train(&z_train, &y_true, config.mlknn_k, config.mlknn_smoothing)?;
            mlknn_predict_batch(&model, &z_test)?
        }
        // The supervised baseline only ever sees its labeled subset.
        (EvalProtocol::Semi, Method::Mddmp) => {
            let l = partial.labeled();
            let model = mlknn_train(
                &z_train.rows(0, l).into_owned(),
                &partial.labeled_rows(),
                config.mlknn_k,
                config.mlknn_smoothing,
            )?;
            mlknn_predict_batch(&model, &z_test)?
        }
        (EvalProtocol::Semi, _) => classify_embedded(&z_train, &partial, &z_test, config)?,
    };
    let report = evaluate_all(&test.labels, &test_hard, &test_score)?;
    Ok(ExperimentOutput {
        report,
        projection,
        test_embedding: z_test,
        test_hard,
        test_score,
    })
}

/// Gnuplot-friendly dump: one line per sample, embedding coordinates then labels.
pub fn embedding_dump(z: &DMatrix<f64>, labels: &BinaryMatrix) -> String {
    let mut out = String::new();
    out.push_str("# ");
    out.push_str(&(1..=z.ncols()).map(|j| format!("z{j}")).collect::<Vec<_>>().join(" "));
    for c in 1..=labels.ncols() {
        out.push_str(&format!(" y{c}"));
    }
    out.push('\n');
    for i in 0..z.nrows() {
        let coords = z.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        let labs = labels.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        out.push_str(&coords);
        out.push(' ');
        out.push_str(&labs);
        out.push('\n');
    }
    out
}
