//! Multi-label evaluation measures, all oriented so that higher is better.
//!
//! Hamming loss, macro F1 and micro F1 use hard predictions; ranking loss,
//! average precision, one-error and coverage use real-valued scores.
//!
//! Conventions:
//! - ranks count from 1 by descending score; equal scores are ranked by
//!   ascending class index;
//! - ranking loss counts a tied (relevant, irrelevant) pair as half a violation;
//! - ranking loss and average precision skip samples with no relevant or no
//!   irrelevant label; one-error and coverage skip samples with no relevant label;
//! - a class with no true and no predicted positives contributes 0 to macro F1.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{check_binary, BinaryMatrix};

/// The seven evaluation scores, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub hl_prime: f64,
    pub rl_prime: f64,
    pub ap: f64,
    pub oe_prime: f64,
    pub cov_prime: f64,
    pub ma_f1: f64,
    pub mi_f1: f64,
}

/// Selector for one entry of a [`MetricsReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    HlPrime,
    RlPrime,
    Ap,
    OePrime,
    CovPrime,
    MaF1,
    MiF1,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::HlPrime,
        Metric::RlPrime,
        Metric::Ap,
        Metric::OePrime,
        Metric::CovPrime,
        Metric::MaF1,
        Metric::MiF1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::HlPrime => "hl_prime",
            Metric::RlPrime => "rl_prime",
            Metric::Ap => "ap",
            Metric::OePrime => "oe_prime",
            Metric::CovPrime => "cov_prime",
            Metric::MaF1 => "ma_f1",
            Metric::MiF1 => "mi_f1",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['\'', '-'], "_");
        Ok(match key.as_str() {
            "hl" | "hl_prime" | "hamming" => Metric::HlPrime,
            "rl" | "rl_prime" | "ranking_loss" => Metric::RlPrime,
            "ap" | "average_precision" => Metric::Ap,
            "oe" | "oe_prime" | "one_error" => Metric::OePrime,
            "cov" | "cov_prime" | "coverage" => Metric::CovPrime,
            "maf1" | "ma_f1" | "macro_f1" => Metric::MaF1,
            "mif1" | "mi_f1" | "micro_f1" => Metric::MiF1,
            _ => return Err(Error::Config(format!("unknown metric '{s}'"))),
        })
    }
}

impl MetricsReport {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::HlPrime => self.hl_prime,
            Metric::RlPrime => self.rl_prime,
            Metric::Ap => self.ap,
            Metric::OePrime => self.oe_prime,
            Metric::CovPrime => self.cov_prime,
            Metric::MaF1 => self.ma_f1,
            Metric::MiF1 => self.mi_f1,
        }
    }

    pub fn from_fn(mut f: impl FnMut(Metric) -> f64) -> Self {
        Self {
            hl_prime: f(Metric::HlPrime),
            rl_prime: f(Metric::RlPrime),
            ap: f(Metric::Ap),
            oe_prime: f(Metric::OePrime),
            cov_prime: f(Metric::CovPrime),
            ma_f1: f(Metric::MaF1),
            mi_f1: f(Metric::MiF1),
        }
    }

    pub fn values(&self) -> [f64; 7] {
        Metric::ALL.map(|m| self.get(m))
    }
}

fn check_hard(y_true: &BinaryMatrix, y_pred: &BinaryMatrix) -> Result<()> {
    if y_true.shape() != y_pred.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch: truth {:?} vs prediction {:?}",
            y_true.shape(),
            y_pred.shape()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("empty label matrix"));
    }
    check_binary(y_true)?;
    check_binary(y_pred)
}

fn check_scores(y_true: &BinaryMatrix, scores: &DMatrix<f64>) -> Result<()> {
    if y_true.shape() != scores.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch: truth {:?} vs scores {:?}",
            y_true.shape(),
            scores.shape()
        )));
    }
    if scores.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    check_binary(y_true)
}

/// `1 - HL`.
pub fn hamming_loss_prime(y_true: &BinaryMatrix, y_pred: &BinaryMatrix) -> Result<f64> {
    check_hard(y_true, y_pred)?;
    let mismatches = y_true.iter().zip(y_pred.iter()).filter(|(a, b)| a != b).count();
    Ok(1.0 - mismatches as f64 / y_true.len() as f64)
}

pub fn macro_f1(y_true: &BinaryMatrix, y_pred: &BinaryMatrix) -> Result<f64> {
    check_hard(y_true, y_pred)?;
    let classes = y_true.ncols();
    let total: f64 = (0..classes)
        .map(|c| {
            let (t, p) = (y_true.column(c), y_pred.column(c));
            let tp = t.iter().zip(p.iter()).filter(|(a, b)| **a == 1 && **b == 1).count();
            let denom = t.iter().map(|&v| v as usize).sum::<usize>() + p.iter().map(|&v| v as usize).sum::<usize>();
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / classes as f64)
}

pub fn micro_f1(y_true: &BinaryMatrix, y_pred: &BinaryMatrix) -> Result<f64> {
    check_hard(y_true, y_pred)?;
    let tp = y_true.iter().zip(y_pred.iter()).filter(|(a, b)| **a == 1 && **b == 1).count();
    let denom = y_true.iter().map(|&v| v as usize).sum::<usize>() + y_pred.iter().map(|&v| v as usize).sum::<usize>();
    Ok(if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 })
}

/// Ranks (1 = best) of each class for one sample.
fn ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut rank = vec![0; scores.len()];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r + 1;
    }
    rank
}

fn sample(y_true: &BinaryMatrix, scores: &DMatrix<f64>, i: usize) -> (Vec<bool>, Vec<f64>) {
    (
        y_true.row(i).iter().map(|&v| v == 1).collect(),
        scores.row(i).iter().copied().collect(),
    )
}

/// `1 - RL`.
pub fn ranking_loss_prime(y_true: &BinaryMatrix, scores: &DMatrix<f64>) -> Result<f64> {
    check_scores(y_true, scores)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..y_true.nrows() {
        let (rel, s) = sample(y_true, scores, i);
        let n_rel = rel.iter().filter(|&&r| r).count();
        let n_irr = rel.len() - n_rel;
        if n_rel == 0 || n_irr == 0 {
            continue;
        }
        let mut violations = 0.0;
        for p in (0..rel.len()).filter(|&c| rel[c]) {
            for q in (0..rel.len()).filter(|&c| !rel[c]) {
                if s[p] < s[q] {
                    violations += 1.0;
                } else if s[p] == s[q] {
                    violations += 0.5;
                }
            }
        }
        total += violations / (n_rel * n_irr) as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric(
            "ranking loss needs a sample with both relevant and irrelevant labels".into(),
        ));
    }
    Ok(1.0 - total / counted as f64)
}

pub fn average_precision(y_true: &BinaryMatrix, scores: &DMatrix<f64>) -> Result<f64> {
    check_scores(y_true, scores)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..y_true.nrows() {
        let (rel, s) = sample(y_true, scores, i);
        let n_rel = rel.iter().filter(|&&r| r).count();
        if n_rel == 0 || n_rel == rel.len() {
            continue;
        }
        let rank = ranks(&s);
        let relevant: Vec<usize> = (0..rel.len()).filter(|&c| rel[c]).collect();
        let precision: f64 = relevant
            .iter()
            .map(|&c| {
                let above = relevant.iter().filter(|&&o| rank[o] <= rank[c]).count();
                above as f64 / rank[c] as f64
            })
            .sum();
        total += precision / n_rel as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs a sample with both relevant and irrelevant labels".into(),
        ));
    }
    Ok(total / counted as f64)
}

/// `1 - OE`: fraction of samples whose top-ranked class is relevant.
pub fn one_error_prime(y_true: &BinaryMatrix, scores: &DMatrix<f64>) -> Result<f64> {
    check_scores(y_true, scores)?;
    let mut hits = 0usize;
    let mut counted = 0usize;
    for i in 0..y_true.nrows() {
        let (rel, s) = sample(y_true, scores, i);
        if !rel.iter().any(|&r| r) {
            continue;
        }
        let rank = ranks(&s);
        let top = rank.iter().position(|&r| r == 1).unwrap();
        hits += usize::from(rel[top]);
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric("one-error needs a sample with a relevant label".into()));
    }
    Ok(hits as f64 / counted as f64)
}

/// `1 - Cov / (C - 1)`. With a single class the coverage is always 0 and
/// the result is 1.
pub fn coverage_prime(y_true: &BinaryMatrix, scores: &DMatrix<f64>) -> Result<f64> {
    check_scores(y_true, scores)?;
    let classes = y_true.ncols();
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..y_true.nrows() {
        let (rel, s) = sample(y_true, scores, i);
        if !rel.iter().any(|&r| r) {
            continue;
        }
        let rank = ranks(&s);
        let deepest = (0..classes).filter(|&c| rel[c]).map(|c| rank[c]).max().unwrap();
        total += (deepest - 1) as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric("coverage needs a sample with a relevant label".into()));
    }
    if classes < 2 {
        return Ok(1.0);
    }
    Ok(1.0 - total / counted as f64 / (classes - 1) as f64)
}

/// All seven measures: hard ones from `y_pred`, ranking ones from `scores`.
pub fn evaluate_all(y_true: &BinaryMatrix, y_pred: &BinaryMatrix, scores: &DMatrix<f64>) -> Result<MetricsReport> {
    Ok(MetricsReport {
        hl_prime: hamming_loss_prime(y_true, y_pred)?,
        rl_prime: ranking_loss_prime(y_true, scores)?,
        ap: average_precision(y_true, scores)?,
        oe_prime: one_error_prime(y_true, scores)?,
        cov_prime: coverage_prime(y_true, scores)?,
        ma_f1: macro_f1(y_true, y_pred)?,
        mi_f1: micro_f1(y_true, y_pred)?,
    })
}
