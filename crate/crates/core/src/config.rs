//! Pipeline hyper-parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    #[default]
    Knn,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub kind: GraphKind,
    pub k: usize,
    pub sigma: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            kind: GraphKind::Knn,
            k: 10,
            sigma: 1.0,
        }
    }
}

/// Dimensionality-reduction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Nmlsdr,
    Mddmp,
    Pca,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nmlsdr => "nmlsdr",
            Method::Mddmp => "mddmp",
            Method::Pca => "pca",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nmlsdr" => Ok(Method::Nmlsdr),
            "mddmp" => Ok(Method::Mddmp),
            "pca" => Ok(Method::Pca),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

/// Downstream evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EvalProtocol {
    /// Propagation on the embedding followed by ML-kNN on the hardened labels.
    #[default]
    Semi,
    /// ML-kNN trained on the embedded training set with its true labels.
    Supervised,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub flip_fraction: f64,
    pub labeled_fraction: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            flip_fraction: 0.1,
            labeled_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub graph: GraphConfig,
    pub alpha_labeled: f64,
    pub alpha_unlabeled: f64,
    /// Embedding dimension; `None` means the number of classes (PCA: also capped by D).
    pub d: Option<usize>,
    pub mlknn_k: usize,
    pub mlknn_smoothing: f64,
    pub noise: NoiseConfig,
    pub seed: u64,
    pub method: Method,
    pub eval: EvalProtocol,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            graph: GraphConfig::default(),
            alpha_labeled: 0.6,
            alpha_unlabeled: 0.999,
            d: None,
            mlknn_k: 10,
            mlknn_smoothing: 1.0,
            noise: NoiseConfig::default(),
            seed: 0,
            method: Method::Nmlsdr,
            eval: EvalProtocol::Semi,
        }
    }
}

impl PipelineConfig {
    /// Checks every hyper-parameter domain. `classes` bounds `d` when known.
    pub fn validate(&self, classes: Option<usize>) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, a) in [("alpha_labeled", self.alpha_labeled), ("alpha_unlabeled", self.alpha_unlabeled)] {
            if !(0.0..1.0).contains(&a) {
                return bad(format!("{name} = {a} must lie in [0, 1)"));
            }
        }
        if self.graph.k == 0 {
            return bad("graph.k must be at least 1".into());
        }
        if self.graph.kind == GraphKind::Rbf && !(self.graph.sigma > 0.0) {
            return bad(format!("graph.sigma = {} must be positive", self.graph.sigma));
        }
        if self.mlknn_k == 0 {
            return bad("mlknn_k must be at least 1".into());
        }
        if !(self.mlknn_smoothing > 0.0) {
            return bad("mlknn_smoothing must be positive".into());
        }
        if !(0.0..1.0).contains(&self.noise.flip_fraction) {
            return bad(format!("noise.flip_fraction = {} must lie in [0, 1)", self.noise.flip_fraction));
        }
        if !(self.noise.labeled_fraction > 0.0 && self.noise.labeled_fraction <= 1.0) {
            return bad(format!(
                "noise.labeled_fraction = {} must lie in (0, 1]",
                self.noise.labeled_fraction
            ));
        }
        match (self.d, classes) {
            (Some(0), _) => bad("d must be at least 1".into()),
            (Some(d), Some(c)) if d > c && self.method != Method::Pca => {
                bad(format!("d = {d} exceeds the number of classes C = {c}"))
            }
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}
