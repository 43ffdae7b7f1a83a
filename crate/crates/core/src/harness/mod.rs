//! Experiment grids, result tables and Wilcoxon scoring.

mod experiment;
mod stats;
mod table;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{generate_synthetic, load_dataset, read_bundle, FileFormat, LabelPosition, MultiLabelDataset, Split};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::{Method, PipelineConfig};

pub use experiment::{embedding_dump, run_experiment, run_experiment_detailed, ExperimentOutput};
pub use stats::{
    wilcoxon_pair_score, wilcoxon_signed_rank, wilcoxon_signed_rank_normal, wilcoxon_totals, SignedRankTest,
    EXACT_LIMIT, TIE_TOLERANCE,
};
pub use table::{count_best, count_best_means, wilcoxon_matrix, CellMeans, ResultRow, ResultsTable};

/// Default significance level for pairwise scoring.
pub const ALPHA_LEVEL: f64 = 0.05;

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Generated; `seed` defaults to the repetition seed.
    Synthetic {
        #[serde(default = "synthetic_name")]
        name: String,
        #[serde(default)]
        seed: Option<u64>,
    },
    Files {
        name: String,
        train: PathBuf,
        test: PathBuf,
        format: FileFormat,
        label_count: usize,
        #[serde(default)]
        labels_at: LabelPosition,
    },
    Bundle {
        name: String,
        path: PathBuf,
    },
}

fn synthetic_name() -> String {
    "synthetic".into()
}

impl DatasetSpec {
    pub fn name(&self) -> &str {
        match self {
            DatasetSpec::Synthetic { name, .. } | DatasetSpec::Files { name, .. } | DatasetSpec::Bundle { name, .. } => {
                name
            }
        }
    }

    /// Loads the (train, test) pair; relative paths resolve against `base`.
    pub fn load(&self, base: &Path, repetition_seed: u64) -> Result<(MultiLabelDataset, MultiLabelDataset)> {
        match self {
            DatasetSpec::Synthetic { seed, .. } => Ok(generate_synthetic(seed.unwrap_or(repetition_seed))),
            DatasetSpec::Files {
                train,
                test,
                format,
                label_count,
                labels_at,
                ..
            } => {
                let a = load_dataset(&base.join(train), *format, *label_count, *labels_at)?;
                let mut b = load_dataset(&base.join(test), *format, *label_count, *labels_at)?;
                b.split = Split::Test;
                Ok((a, b))
            }
            DatasetSpec::Bundle { path, .. } => read_bundle(&base.join(path)),
        }
    }
}

/// Keys of a run file that are not pipeline hyper-parameters.
const RUN_KEYS: [&str; 5] = ["methods", "datasets", "repetitions", "dump_embedding", "alpha_level"];

/// A run file: every [`PipelineConfig`] key at top level plus the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    /// Empty means `[pipeline.method]`.
    pub methods: Vec<Method>,
    pub datasets: Vec<DatasetSpec>,
    pub repetitions: usize,
    pub dump_embedding: bool,
    pub alpha_level: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            methods: Vec::new(),
            datasets: vec![DatasetSpec::Synthetic {
                name: synthetic_name(),
                seed: None,
            }],
            repetitions: 1,
            dump_embedding: false,
            alpha_level: ALPHA_LEVEL,
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl RunConfig {
    /// Parses JSON, or TOML when `toml` is set.
    pub fn parse(text: &str, toml: bool) -> Result<Self> {
        let value: Value = if toml {
            serde_json::to_value(toml::from_str::<toml::Table>(text).map_err(config_error)?).map_err(config_error)?
        } else {
            serde_json::from_str(text).map_err(config_error)?
        };
        let Value::Object(mut map) = value else {
            return Err(Error::Config("run config must be a table/object".into()));
        };
        let mut run = RunConfig::default();
        let mut take = |key: &str| map.remove(key);
        if let Some(v) = take("methods") {
            run.methods = serde_json::from_value(v).map_err(config_error)?;
        }
        if let Some(v) = take("datasets") {
            run.datasets = serde_json::from_value(v).map_err(config_error)?;
        }
        if let Some(v) = take("repetitions") {
            run.repetitions = serde_json::from_value(v).map_err(config_error)?;
        }
        if let Some(v) = take("dump_embedding") {
            run.dump_embedding = serde_json::from_value(v).map_err(config_error)?;
        }
        if let Some(v) = take("alpha_level") {
            run.alpha_level = serde_json::from_value(v).map_err(config_error)?;
        }
        debug_assert!(RUN_KEYS.iter().all(|k| !map.contains_key(*k)));
        run.pipeline = serde_json::from_value(Value::Object(map)).map_err(config_error)?;
        run.validate()?;
        Ok(run)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = crate::data::io::read_text(path)?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        Self::parse(&text, is_toml)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate(None)?;
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets configured".into()));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::Config("alpha_level must lie in (0, 1)".into()));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(DatasetSpec::name).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("dataset names must be unique".into()));
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<Method> {
        if self.methods.is_empty() {
            vec![self.pipeline.method]
        } else {
            self.methods.clone()
        }
    }
}

/// Seed of repetition `rep`.
pub fn repetition_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_add(rep as u64)
}

/// Result of [`run_grid`]: the table and any embedding dumps (file name → contents).
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    pub table: ResultsTable,
    pub dumps: Vec<(String, String)>,
}

/// Runs every (dataset, repetition, method) cell in a fixed order.
pub fn run_grid(run: &RunConfig, base: &Path) -> Result<GridOutput> {
    run.validate()?;
    let mut table = ResultsTable::new();
    let mut dumps = Vec::new();
    for spec in &run.datasets {
        for rep in 0..run.repetitions {
            let seed = repetition_seed(run.pipeline.seed, rep);
            let (train, test) = spec.load(base, seed)?;
            for method in run.methods() {
                let config = PipelineConfig {
                    method,
                    seed,
                    ..run.pipeline.clone()
                };
                log::info!("running {} on {} (repetition {rep})", method.name(), spec.name());
                let out = run_experiment_detailed(&config, &train, &test)?;
                if run.dump_embedding {
                    dumps.push((
                        format!("embedding_{}_{}_rep{rep}.dat", method.name(), spec.name()),
                        embedding_dump(&out.test_embedding, &test.labels),
                    ));
                }
                table.push(method.name(), spec.name(), rep, out.report);
            }
        }
    }
    Ok(GridOutput { table, dumps })
}

/// Best counts, per-dataset means and (with at least five datasets)
/// Wilcoxon totals for every metric. Keys are sorted, so the JSON
/// rendering is deterministic.
pub fn summarize(table: &ResultsTable, alpha_level: f64) -> Result<Value> {
    let mut best = BTreeMap::new();
    let mut means = BTreeMap::new();
    let mut wilcoxon = BTreeMap::new();
    let mut wilcoxon_sum: BTreeMap<String, f64> = BTreeMap::new();
    let datasets = table.datasets().len();
    for metric in Metric::ALL {
        let cells = table.cell_means(metric)?;
        let counts = count_best_means(&cells);
        best.insert(
            metric.name(),
            cells.methods.iter().cloned().zip(counts).collect::<BTreeMap<_, _>>(),
        );
        let per_method: BTreeMap<String, BTreeMap<String, f64>> = cells
            .methods
            .iter()
            .zip(&cells.values)
            .map(|(m, vals)| (m.clone(), cells.datasets.iter().cloned().zip(vals.iter().copied()).collect()))
            .collect();
        means.insert(metric.name(), per_method);
        if datasets >= 5 {
            let totals = wilcoxon_totals(&cells.values, alpha_level)?;
            for (m, t) in cells.methods.iter().zip(&totals) {
                *wilcoxon_sum.entry(m.clone()).or_default() += t / Metric::ALL.len() as f64;
            }
            wilcoxon.insert(
                metric.name(),
                cells.methods.iter().cloned().zip(totals).collect::<BTreeMap<_, _>>(),
            );
        }
    }
    Ok(json!({
        "cells": table.len(),
        "methods": table.methods(),
        "datasets": table.datasets(),
        "best_counts": best,
        "means": means,
        "wilcoxon": if datasets >= 5 { json!(wilcoxon) } else { Value::Null },
        "mean_wilcoxon": if datasets >= 5 { json!(wilcoxon_sum) } else { Value::Null },
    }))
}

/// Writes `results.csv`, `summary.json` and any dumps into `out`.
pub fn write_outputs(out: &Path, run: &RunConfig, grid: &GridOutput) -> Result<()> {
    fs::create_dir_all(out)?;
    grid.table.write_csv(&out.join("results.csv"))?;
    let mut summary = summarize(&grid.table, run.alpha_level)?;
    summary["config"] = serde_json::to_value(run)?;
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    for (name, body) in &grid.dumps {
        fs::write(out.join(name), body)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_parses_flat_json_and_toml() {
        let j = r#"{"alpha_labeled": 0.5, "methods": ["nmlsdr", "pca"], "repetitions": 2,
                    "datasets": [{"source": "synthetic", "seed": 4}], "graph": {"k": 7}}"#;
        let a = RunConfig::parse(j, false).unwrap();
        assert_eq!(a.pipeline.alpha_labeled, 0.5);
        assert_eq!(a.pipeline.graph.k, 7);
        assert_eq!(a.methods(), vec![Method::Nmlsdr, Method::Pca]);
        let t = "alpha_labeled = 0.5\nmethods = [\"nmlsdr\", \"pca\"]\nrepetitions = 2\n\
                 [graph]\nk = 7\n[[datasets]]\nsource = \"synthetic\"\nseed = 4\n";
        assert_eq!(RunConfig::parse(t, true).unwrap(), a);
    }

    #[test]
    fn run_config_rejects_typos_and_bad_domains() {
        assert!(matches!(RunConfig::parse(r#"{"alpah_labeled": 0.5}"#, false), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse(r#"{"alpha_labeled": 1.5}"#, false), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse(r#"{"repetitions": 0}"#, false), Err(Error::Config(_))));
        assert!(RunConfig::parse("{not json", false).is_err());
    }

    #[test]
    fn default_is_one_synthetic_cell() {
        let r = RunConfig::parse("{}", false).unwrap();
        assert_eq!(r.methods(), vec![Method::Nmlsdr]);
        assert_eq!(r.datasets[0].name(), "synthetic");
    }
}
