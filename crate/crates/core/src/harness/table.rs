//! Results tables: one row per (method, dataset, repetition) cell.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::wilcoxon_totals;
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricsReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub dataset: String,
    pub repetition: usize,
    pub report: MetricsReport,
}

const KEY_COLUMNS: [&str; 3] = ["method", "dataset", "repetition"];

impl ResultRow {
    fn record(&self) -> Vec<String> {
        let mut out = vec![self.method.clone(), self.dataset.clone(), self.repetition.to_string()];
        out.extend(self.report.values().iter().map(|v| v.to_string()));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    rows: Vec<ResultRow>,
}

/// Per-method mean of a metric on each dataset (mean over repetitions).
#[derive(Debug, Clone, PartialEq)]
pub struct CellMeans {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// `values[m][d]`.
    pub values: Vec<Vec<f64>>,
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_owned());
        }
    }
    out
}

impl ResultsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, method: &str, dataset: &str, repetition: usize, report: MetricsReport) {
        self.rows.push(ResultRow {
            method: method.to_owned(),
            dataset: dataset.to_owned(),
            repetition,
            report,
        });
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Methods and datasets in order of first appearance.
    pub fn methods(&self) -> Vec<String> {
        first_seen(self.rows.iter().map(|r| r.method.as_str()))
    }

    pub fn datasets(&self) -> Vec<String> {
        first_seen(self.rows.iter().map(|r| r.dataset.as_str()))
    }

    /// Columns: method, dataset, repetition, then the seven metrics.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(KEY_COLUMNS.iter().copied().chain(Metric::ALL.iter().map(|m| m.name())))?;
        for row in &self.rows {
            w.write_record(row.record())?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("results table lacks column '{name}'")))
        };
        let (method, dataset, repetition) = (column("method")?, column("dataset")?, column("repetition")?);
        let metric_cols = Metric::ALL.iter().map(|m| column(m.name())).collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for (k, record) in r.records().enumerate() {
            let record = record?;
            let line = k + 2;
            let field = |c: usize| record.get(c).ok_or_else(|| Error::Parse { line, message: "short row".into() });
            let number = |c: usize| -> Result<f64> {
                let v = field(c)?;
                v.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("'{v}' is not a number"),
                })
            };
            let values = metric_cols.iter().map(|&c| number(c)).collect::<Result<Vec<_>>>()?;
            let mut it = values.into_iter();
            rows.push(ResultRow {
                method: field(method)?.to_owned(),
                dataset: field(dataset)?.to_owned(),
                repetition: field(repetition)?.parse().map_err(|_| Error::Parse {
                    line,
                    message: "repetition is not an integer".into(),
                })?,
                report: MetricsReport::from_fn(|_| it.next().unwrap_or(f64::NAN)),
            });
        }
        Ok(Self { rows })
    }

    /// Means over repetitions; errors when any (method, dataset) cell is missing.
    pub fn cell_means(&self, metric: Metric) -> Result<CellMeans> {
        let methods = self.methods();
        let datasets = self.datasets();
        let mut acc: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry((&r.method, &r.dataset)).or_insert((0.0, 0));
            e.0 += r.report.get(metric);
            e.1 += 1;
        }
        let values = methods
            .iter()
            .map(|m| {
                datasets
                    .iter()
                    .map(|d| {
                        acc.get(&(m.as_str(), d.as_str()))
                            .map(|(s, c)| s / *c as f64)
                            .ok_or_else(|| Error::Data(format!("missing result for method '{m}' on dataset '{d}'")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CellMeans {
            methods,
            datasets,
            values,
        })
    }
}

/// Number of datasets on which each method attains the maximum (ties all count).
pub fn count_best_means(means: &CellMeans) -> Vec<usize> {
    let mut counts = vec![0; means.methods.len()];
    for d in 0..means.datasets.len() {
        let best = means.values.iter().map(|col| col[d]).fold(f64::NEG_INFINITY, f64::max);
        for (m, col) in means.values.iter().enumerate() {
            if col[d] == best {
                counts[m] += 1;
            }
        }
    }
    counts
}

pub fn count_best(table: &ResultsTable, metric: Metric) -> Result<Vec<(String, usize)>> {
    let means = table.cell_means(metric)?;
    let counts = count_best_means(&means);
    Ok(means.methods.into_iter().zip(counts).collect())
}

/// Pairwise Wilcoxon totals per method over the per-dataset means.
pub fn wilcoxon_matrix(table: &ResultsTable, metric: Metric, alpha_level: f64) -> Result<Vec<(String, f64)>> {
    let means = table.cell_means(metric)?;
    let totals = wilcoxon_totals(&means.values, alpha_level)?;
    Ok(means.methods.into_iter().zip(totals).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(v: f64) -> MetricsReport {
        MetricsReport::from_fn(|_| v)
    }

    #[test]
    fn best_counts_include_ties() {
        let mut t = ResultsTable::new();
        for (d, vals) in [("a", [0.9, 0.8]), ("b", [0.7, 0.7]), ("c", [0.1, 0.2])] {
            t.push("x", d, 0, report(vals[0]));
            t.push("y", d, 0, report(vals[1]));
        }
        let best = count_best(&t, Metric::Ap).unwrap();
        assert_eq!(best, vec![("x".into(), 2), ("y".into(), 2)]);
    }

    #[test]
    fn missing_cells_are_reported() {
        let mut t = ResultsTable::new();
        t.push("x", "a", 0, report(0.5));
        t.push("y", "b", 0, report(0.5));
        assert!(matches!(t.cell_means(Metric::Ap), Err(Error::Data(_))));
    }

    #[test]
    fn repetitions_are_averaged() {
        let mut t = ResultsTable::new();
        t.push("x", "a", 0, report(0.25));
        t.push("x", "a", 1, report(0.75));
        assert_eq!(t.cell_means(Metric::HlPrime).unwrap().values, vec![vec![0.5]]);
    }

    #[test]
    fn csv_round_trip() {
        let mut t = ResultsTable::new();
        t.push("nmlsdr", "synthetic", 0, report(0.1 + 0.2));
        t.push("pca", "synthetic", 1, report(1.0 / 3.0));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        t.write_csv(&p).unwrap();
        assert_eq!(ResultsTable::read_csv(&p).unwrap(), t);
        let text = t.to_csv_string().unwrap();
        assert!(text.starts_with("method,dataset,repetition,hl_prime,rl_prime,ap,oe_prime,cov_prime,ma_f1,mi_f1\n"));
    }
}
