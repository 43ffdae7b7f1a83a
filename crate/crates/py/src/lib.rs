//! Python bindings. Matrices cross the boundary as lists of rows.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nmlsdr::classifier::{self, MlknnModel};
use nmlsdr::data::{self, MultiLabelDataset, PartialLabelMatrix, Split};
use nmlsdr::graph::{build_adjacency, transition_from_adjacency};
use nmlsdr::harness;
use nmlsdr::metrics::{evaluate_all, Metric};
use nmlsdr::projection::{self, FitMetadata};
use nmlsdr::propagation::{self, AlphaSchedule};
use nmlsdr::{Error, GraphConfig, GraphKind, PipelineConfig};

type Rows<T> = Vec<Vec<T>>;
type Split2 = (Rows<f64>, Rows<u8>);

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::DegenerateGraph { .. } | Error::ConvergenceFailure { .. } | Error::Numeric(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        Error::Experiment { ref source, .. } if source.exit_code() == 4 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix<T: nalgebra::Scalar + Copy>(rows: &Rows<T>, name: &str) -> PyResult<DMatrix<T>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err(format!("{name}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn rows<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> Rows<T> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn config_from(json: Option<&str>) -> PyResult<PipelineConfig> {
    let config: PipelineConfig = match json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    config.validate(None).map_err(to_py_err)?;
    Ok(config)
}

fn partial(y: &Rows<u8>, labeled: usize) -> PyResult<PartialLabelMatrix> {
    PartialLabelMatrix::from_canonical(matrix(y, "y")?, labeled).map_err(to_py_err)
}

/// Soft labels after propagation over a kNN (or RBF) graph on `x`. The
/// first `labeled` rows of `y` are labeled; later rows are ignored.
#[pyfunction]
#[pyo3(signature = (x, y, labeled, k=10, alpha_labeled=0.6, alpha_unlabeled=0.999, sigma=None))]
fn propagate(
    x: Rows<f64>,
    y: Rows<u8>,
    labeled: usize,
    k: usize,
    alpha_labeled: f64,
    alpha_unlabeled: f64,
    sigma: Option<f64>,
) -> PyResult<Rows<f64>> {
    let x = matrix(&x, "x")?;
    let y = partial(&y, labeled)?;
    let graph = match sigma {
        Some(sigma) => GraphConfig {
            kind: GraphKind::Rbf,
            sigma,
            k,
        },
        None => GraphConfig {
            k,
            ..Default::default()
        },
    };
    let t = transition_from_adjacency(&build_adjacency(&x, &graph).map_err(to_py_err)?).map_err(to_py_err)?;
    let alpha = AlphaSchedule::split(x.nrows(), labeled, alpha_labeled, alpha_unlabeled).map_err(to_py_err)?;
    let f = propagation::propagate_direct(&t, y.initial(), &alpha).map_err(to_py_err)?;
    Ok(rows(f.matrix()))
}

/// Orthonormal linear projection (D×d).
#[pyclass(name = "Projection", module = "nmlsdr")]
struct PyProjection {
    inner: projection::Projection,
}

#[pymethods]
impl PyProjection {
    /// NMLSDR fit: propagate, assemble the denoised labels, maximize dependence.
    #[staticmethod]
    #[pyo3(signature = (x, y, labeled, d, config_json=None))]
    fn fit_nmlsdr(x: Rows<f64>, y: Rows<u8>, labeled: usize, d: usize, config_json: Option<&str>) -> PyResult<Self> {
        let config = config_from(config_json)?;
        let x = matrix(&x, "x")?;
        let y = partial(&y, labeled)?;
        let f = classifier::propagate_on(&x, &y, &config).map_err(to_py_err)?;
        let f_tilde = propagation::assemble_f_tilde(&f, labeled).map_err(to_py_err)?;
        let inner = projection::nmlsdr_fit(&x, &f_tilde, d).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Dependence maximization on labeled samples only.
    #[staticmethod]
    fn fit_mddmp(x: Rows<f64>, y: Rows<u8>, d: usize) -> PyResult<Self> {
        let inner = projection::mddmp_fit(&matrix(&x, "x")?, &matrix(&y, "y")?, d).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn fit_pca(x: Rows<f64>, d: usize) -> PyResult<Self> {
        let inner = projection::pca_fit(&matrix(&x, "x")?, d).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    fn transform(&self, x: Rows<f64>) -> PyResult<Rows<f64>> {
        Ok(rows(&projection::transform(&self.inner, &matrix(&x, "x")?).map_err(to_py_err)?))
    }

    #[getter]
    fn basis(&self) -> Rows<f64> {
        rows(self.inner.basis())
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    #[getter]
    fn numerical_rank(&self) -> usize {
        self.inner.numerical_rank()
    }

    #[pyo3(signature = (path, method="nmlsdr"))]
    fn save(&self, path: PathBuf, method: &str) -> PyResult<()> {
        let meta = FitMetadata {
            method: method.to_owned(),
            hyper_parameters: BTreeMap::new(),
            seed: None,
        };
        self.inner.save(&path, &meta).map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, _) = projection::Projection::load(&path).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!("Projection(input_dim={}, output_dim={})", self.inner.input_dim(), self.inner.output_dim())
    }
}

/// ML-kNN multi-label classifier.
#[pyclass(name = "MlknnModel", module = "nmlsdr")]
struct PyMlknn {
    inner: MlknnModel,
}

#[pymethods]
impl PyMlknn {
    #[staticmethod]
    #[pyo3(signature = (z, y, k=10, s=1.0))]
    fn train(z: Rows<f64>, y: Rows<u8>, k: usize, s: f64) -> PyResult<Self> {
        let inner = classifier::mlknn_train(&matrix(&z, "z")?, &matrix(&y, "y")?, k, s).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// `(hard, score)` for every row of `z`.
    fn predict(&self, z: Rows<f64>) -> PyResult<(Rows<u8>, Rows<f64>)> {
        let (h, s) = classifier::mlknn_predict_batch(&self.inner, &matrix(&z, "z")?).map_err(to_py_err)?;
        Ok((rows(&h), rows(&s)))
    }

    #[getter]
    fn priors(&self) -> Vec<f64> {
        self.inner.priors.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: MlknnModel::from_json(text).map_err(to_py_err)?,
        })
    }
}

/// The two-step semi-supervised classifier; returns `(hard, score)` for `x_test`.
#[pyfunction]
#[pyo3(signature = (x_train, y, labeled, x_test, config_json=None))]
fn semi_supervised_classify(
    x_train: Rows<f64>,
    y: Rows<u8>,
    labeled: usize,
    x_test: Rows<f64>,
    config_json: Option<&str>,
) -> PyResult<(Rows<u8>, Rows<f64>)> {
    let config = config_from(config_json)?;
    let (h, s) = classifier::semi_supervised_classify(
        &matrix(&x_train, "x_train")?,
        &partial(&y, labeled)?,
        &matrix(&x_test, "x_test")?,
        &config,
    )
    .map_err(to_py_err)?;
    Ok((rows(&h), rows(&s)))
}

/// All seven measures as a dict keyed by metric name.
#[pyfunction]
fn evaluate(y_true: Rows<u8>, y_pred: Rows<u8>, scores: Rows<f64>) -> PyResult<BTreeMap<String, f64>> {
    let r = evaluate_all(&matrix(&y_true, "y_true")?, &matrix(&y_pred, "y_pred")?, &matrix(&scores, "scores")?)
        .map_err(to_py_err)?;
    Ok(Metric::ALL.iter().map(|m| (m.name().to_owned(), r.get(*m))).collect())
}

/// `((x_train, y_train), (x_test, y_test))` of the synthetic benchmark.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn generate_synthetic(seed: u64) -> (Split2, Split2) {
    let (a, b) = data::generate_synthetic(seed);
    ((rows(&a.features), rows(&a.labels)), (rows(&b.features), rows(&b.labels)))
}

#[pyfunction]
fn flip_labels(y: Rows<u8>, p: f64, seed: u64) -> PyResult<Rows<u8>> {
    Ok(rows(&data::flip_labels(&matrix(&y, "y")?, p, seed).map_err(to_py_err)?))
}

/// `(initial, labeled_count, order)`: labeled rows first, unlabeled rows zeroed.
#[pyfunction]
fn mask_labels(y: Rows<u8>, labeled_fraction: f64, seed: u64) -> PyResult<(Rows<u8>, usize, Vec<usize>)> {
    let p = data::mask_labels(&matrix(&y, "y")?, labeled_fraction, seed).map_err(to_py_err)?;
    Ok((rows(p.initial()), p.labeled(), p.order().to_vec()))
}

/// One full experiment cell; returns the metrics dict.
#[pyfunction]
#[pyo3(signature = (x_train, y_train, x_test, y_test, config_json=None))]
fn run_experiment(
    x_train: Rows<f64>,
    y_train: Rows<u8>,
    x_test: Rows<f64>,
    y_test: Rows<u8>,
    config_json: Option<&str>,
) -> PyResult<BTreeMap<String, f64>> {
    let config = config_from(config_json)?;
    let train = MultiLabelDataset::new(matrix(&x_train, "x_train")?, matrix(&y_train, "y_train")?, Split::Train)
        .map_err(to_py_err)?;
    let test = MultiLabelDataset::new(matrix(&x_test, "x_test")?, matrix(&y_test, "y_test")?, Split::Test)
        .map_err(to_py_err)?;
    let r = harness::run_experiment(&config, &train, &test).map_err(to_py_err)?;
    Ok(Metric::ALL.iter().map(|m| (m.name().to_owned(), r.get(*m))).collect())
}

#[pyfunction]
#[pyo3(signature = (a, b, alpha_level=0.05))]
fn wilcoxon_pair_score(a: Vec<f64>, b: Vec<f64>, alpha_level: f64) -> PyResult<(f64, f64)> {
    harness::wilcoxon_pair_score(&a, &b, alpha_level).map_err(to_py_err)
}

#[pymodule]
#[pyo3(name = "nmlsdr")]
fn nmlsdr_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProjection>()?;
    m.add_class::<PyMlknn>()?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(semi_supervised_classify, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(flip_labels, m)?)?;
    m.add_function(wrap_pyfunction!(mask_labels, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_pair_score, m)?)?;
    Ok(())
}
