//! CSV / ARFF ingestion and the on-disk dataset bundle.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MultiLabelDataset, Split};
use crate::error::{Error, Result};
use crate::{BinaryMatrix, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv,
    Arff,
}

impl std::str::FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(FileFormat::Csv),
            "arff" => Ok(FileFormat::Arff),
            _ => Err(Error::Config(format!("unknown file format '{s}'"))),
        }
    }
}

/// Whether the label columns come first or last in each row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LabelPosition {
    Head,
    #[default]
    Tail,
}

struct RawTable {
    names: Option<Vec<String>>,
    rows: Vec<(usize, Vec<String>)>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn read_csv_table(text: &str) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut names = None;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(k + 1);
        let fields: Vec<String> = record.iter().map(str::to_owned).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        // A first row with any non-numeric cell is a header.
        if rows.is_empty() && names.is_none() && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            names = Some(fields);
            continue;
        }
        rows.push((line, fields));
    }
    Ok(RawTable { names, rows })
}

fn read_arff_table(text: &str) -> Result<RawTable> {
    let mut names = Vec::new();
    let mut rows = Vec::new();
    let mut in_data = false;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if in_data {
            if trimmed.starts_with('{') {
                return Err(parse_error(line, "sparse ARFF rows are not supported"));
            }
            let fields = trimmed.split(',').map(|f| f.trim().trim_matches('\'').to_owned()).collect();
            rows.push((line, fields));
            continue;
        }
        let lower = trimmed.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            continue;
        } else if lower.starts_with("@attribute") {
            let rest = trimmed["@attribute".len()..].trim();
            let (name, kind) = split_attribute(rest).ok_or_else(|| parse_error(line, "malformed @attribute"))?;
            let kind_lower = kind.to_ascii_lowercase();
            let is_numeric = matches!(kind_lower.as_str(), "numeric" | "real" | "integer");
            let is_binary = {
                let inner: String = kind.chars().filter(|c| !c.is_whitespace()).collect();
                inner == "{0,1}" || inner == "{1,0}"
            };
            if !is_numeric && !is_binary {
                return Err(parse_error(line, format!("unsupported attribute type '{kind}' for '{name}'")));
            }
            names.push(name);
        } else if lower.starts_with("@data") {
            in_data = true;
        } else {
            return Err(parse_error(line, format!("unexpected header line '{trimmed}'")));
        }
    }
    if !in_data {
        return Err(parse_error(0, "missing @data section"));
    }
    Ok(RawTable {
        names: Some(names),
        rows,
    })
}

fn split_attribute(rest: &str) -> Option<(String, String)> {
    let rest = rest.trim();
    if let Some(stripped) = rest.strip_prefix('\'') {
        let end = stripped.find('\'')?;
        Some((stripped[..end].to_owned(), stripped[end + 1..].trim().to_owned()))
    } else {
        let mut parts = rest.splitn(2, char::is_whitespace);
        let name = parts.next()?.to_owned();
        let kind = parts.next()?.trim().to_owned();
        (!kind.is_empty()).then_some((name, kind))
    }
}

/// Reads a dense multi-label dataset. `label_count` columns at the head or
/// tail of each row are labels (must be 0 or 1); the rest are features.
pub fn load_dataset(
    path: &Path,
    format: FileFormat,
    label_count: usize,
    labels_at: LabelPosition,
) -> Result<MultiLabelDataset> {
    let text = read_text(path)?;
    let table = match format {
        FileFormat::Csv => read_csv_table(&text)?,
        FileFormat::Arff => read_arff_table(&text)?,
    };
    let width = match (&table.names, table.rows.first()) {
        (Some(n), _) => n.len(),
        (None, Some((_, r))) => r.len(),
        (None, None) => return Err(Error::Data(format!("{}: no data rows", path.display()))),
    };
    if label_count == 0 || label_count >= width {
        return Err(Error::Data(format!(
            "label_count = {label_count} incompatible with {width} columns"
        )));
    }
    let dim = width - label_count;
    let label_cols: Vec<usize> = match labels_at {
        LabelPosition::Head => (0..label_count).collect(),
        LabelPosition::Tail => (dim..width).collect(),
    };
    let feature_cols: Vec<usize> = match labels_at {
        LabelPosition::Head => (label_count..width).collect(),
        LabelPosition::Tail => (0..dim).collect(),
    };
    let n = table.rows.len();
    let mut features = FeatureMatrix::zeros(n, dim);
    let mut labels = BinaryMatrix::zeros(n, label_count);
    for (i, (line, fields)) in table.rows.iter().enumerate() {
        if fields.len() != width {
            return Err(parse_error(*line, format!("expected {width} fields, found {}", fields.len())));
        }
        for (j, &col) in feature_cols.iter().enumerate() {
            let v: f64 = fields[col]
                .parse()
                .map_err(|_| parse_error(*line, format!("column {}: '{}' is not numeric", col + 1, fields[col])))?;
            if !v.is_finite() {
                return Err(parse_error(*line, format!("column {}: non-finite value", col + 1)));
            }
            features[(i, j)] = v;
        }
        for (j, &col) in label_cols.iter().enumerate() {
            labels[(i, j)] = match fields[col].parse::<f64>() {
                Ok(0.0) => 0,
                Ok(1.0) => 1,
                _ => {
                    return Err(parse_error(
                        *line,
                        format!("column {}: label value '{}' is not 0 or 1", col + 1, fields[col]),
                    ))
                }
            };
        }
    }
    let mut ds = MultiLabelDataset::new(features, labels, Split::Train)?;
    if let Some(names) = table.names {
        ds.feature_names = Some(feature_cols.iter().map(|&c| names[c].clone()).collect());
        ds.label_names = Some(label_cols.iter().map(|&c| names[c].clone()).collect());
    }
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub features: String,
    pub labels: String,
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    pub labeled: usize,
}

/// `manifest.json` of a dataset bundle directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub seed: Option<u64>,
    pub provenance: String,
    pub splits: BTreeMap<String, SplitEntry>,
}

fn write_matrix_csv<T: std::fmt::Display + nalgebra::Scalar>(
    path: &Path,
    m: &nalgebra::DMatrix<T>,
    header: Option<&[String]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<split>_features.csv`, `<split>_labels.csv` and `manifest.json`.
pub fn write_bundle(
    dir: &Path,
    datasets: &[&MultiLabelDataset],
    seed: Option<u64>,
    provenance: &str,
) -> Result<BundleManifest> {
    fs::create_dir_all(dir)?;
    let mut splits = BTreeMap::new();
    for ds in datasets {
        let name = match ds.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        let features = format!("{name}_features.csv");
        let labels = format!("{name}_labels.csv");
        write_matrix_csv(&dir.join(&features), &ds.features, ds.feature_names.as_deref())?;
        write_matrix_csv(&dir.join(&labels), &ds.labels, ds.label_names.as_deref())?;
        splits.insert(
            name.to_owned(),
            SplitEntry {
                features,
                labels,
                n: ds.len(),
                dim: ds.dim(),
                classes: ds.classes(),
                labeled: ds.labeled_count(),
            },
        );
    }
    let manifest = BundleManifest {
        format_version: 1,
        seed,
        provenance: provenance.to_owned(),
        splits,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Reads the train and test splits of a bundle written by [`write_bundle`].
pub fn read_bundle(dir: &Path) -> Result<(MultiLabelDataset, MultiLabelDataset)> {
    let manifest: BundleManifest = serde_json::from_str(&read_text(&dir.join("manifest.json"))?)?;
    let load = |name: &str, split: Split| -> Result<MultiLabelDataset> {
        let entry = manifest
            .splits
            .get(name)
            .ok_or_else(|| Error::Data(format!("bundle has no '{name}' split")))?;
        let f = read_csv_table(&read_text(&dir.join(&entry.features))?)?;
        let l = read_csv_table(&read_text(&dir.join(&entry.labels))?)?;
        if f.rows.len() != entry.n || l.rows.len() != entry.n {
            return Err(Error::Data(format!("'{name}' split row count differs from manifest")));
        }
        let mut features = FeatureMatrix::zeros(entry.n, entry.dim);
        let mut labels = BinaryMatrix::zeros(entry.n, entry.classes);
        for (i, ((fl, fr), (ll, lr))) in f.rows.iter().zip(&l.rows).enumerate() {
            if fr.len() != entry.dim || lr.len() != entry.classes {
                return Err(parse_error(*fl, "row width differs from manifest"));
            }
            for (j, v) in fr.iter().enumerate() {
                features[(i, j)] = v.parse().map_err(|_| parse_error(*fl, format!("bad number '{v}'")))?;
            }
            for (j, v) in lr.iter().enumerate() {
                labels[(i, j)] = match v.as_str() {
                    "0" => 0,
                    "1" => 1,
                    _ => return Err(parse_error(*ll, format!("label value '{v}' is not 0 or 1"))),
                };
            }
        }
        let mut ds = MultiLabelDataset::new(features, labels, split)?;
        ds.feature_names = f.names;
        ds.label_names = l.names;
        ds.labeled = (0..entry.n).map(|i| i < entry.labeled).collect();
        Ok(ds)
    };
    Ok((load("train", Split::Train)?, load("test", Split::Test)?))
}

/// `fs::read_to_string` with the path in the error message.
pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))
}
