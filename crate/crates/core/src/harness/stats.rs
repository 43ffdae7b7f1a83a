//! Wilcoxon signed-rank scoring of paired method results.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of non-zero pairs for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 25;

/// Differences and absolute differences closer than this (relative to the
/// largest magnitude involved) are treated as zero / tied. Table values are
/// usually rounded, and `0.951 - 0.950` must tie with `0.787 - 0.786`.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Outcome of a two-sided signed-rank test.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedRankTest {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// Sum of ranks of positive differences (`a > b`).
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Averaged ranks (1-based) of `values`, ties within [`TIE_TOLERANCE`].
fn tied_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut ranks = vec![0.0; n];
    let mut groups = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] - values[order[end - 1]] <= TIE_TOLERANCE * scale {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        groups.push(end - start);
        start = end;
    }
    (ranks, groups)
}

/// Exact two-sided p-value: distribution of `W+` over all `2^n` sign
/// patterns, counted by dynamic programming over doubled (integer) ranks.
fn exact_p(doubled: &[usize], w_plus_doubled: usize) -> f64 {
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let patterns = 2f64.powi(doubled.len() as i32);
    let lower: f64 = counts[..=w_plus_doubled].iter().sum();
    let upper: f64 = counts[w_plus_doubled..].iter().sum();
    (2.0 * lower.min(upper) / patterns).min(1.0)
}

/// Normal approximation with tie and continuity correction.
fn normal_p(n: usize, w_plus: f64, tie_groups: &[usize]) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let ties: f64 = tie_groups.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

fn signed_rank(a: &[f64], b: &[f64], force_normal: bool) -> Result<SignedRankTest> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired samples differ in length ({} vs {})", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in paired samples"));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .filter_map(|(&x, &y)| {
            let d = x - y;
            (d.abs() > TIE_TOLERANCE * x.abs().max(y.abs())).then_some(d)
        })
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(SignedRankTest {
            n,
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            exact: true,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, groups) = tied_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_minus = n as f64 * (n as f64 + 1.0) / 2.0 - w_plus;
    let exact = n <= EXACT_LIMIT && !force_normal;
    let p_value = if exact {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        exact_p(&doubled, (2.0 * w_plus).round() as usize)
    } else {
        normal_p(n, w_plus, &groups)
    };
    Ok(SignedRankTest {
        n,
        w_plus,
        w_minus,
        p_value,
        exact,
    })
}

/// Two-sided Wilcoxon signed-rank test of `a` against `b` (zero differences
/// dropped, tied ranks averaged, exact for at most [`EXACT_LIMIT`] pairs).
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<SignedRankTest> {
    signed_rank(a, b, false)
}

/// Same test, always using the normal approximation.
pub fn wilcoxon_signed_rank_normal(a: &[f64], b: &[f64]) -> Result<SignedRankTest> {
    signed_rank(a, b, true)
}

/// `(1, 0)` if `a` is significantly better, `(0, 1)` if `b` is, else `(0.5, 0.5)`.
pub fn wilcoxon_pair_score(a: &[f64], b: &[f64], alpha_level: f64) -> Result<(f64, f64)> {
    if a.len() < 5 {
        return Err(Error::invalid(format!("Wilcoxon scoring needs at least 5 pairs, got {}", a.len())));
    }
    let t = wilcoxon_signed_rank(a, b)?;
    Ok(if t.n == 0 || t.p_value >= alpha_level || t.w_plus == t.w_minus {
        (0.5, 0.5)
    } else if t.w_plus > t.w_minus {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    })
}

/// Total pairwise scores per method; `columns[m]` holds method m's value
/// on each dataset.
pub fn wilcoxon_totals(columns: &[Vec<f64>], alpha_level: f64) -> Result<Vec<f64>> {
    let m = columns.len();
    let mut totals = vec![0.0; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let (si, sj) = wilcoxon_pair_score(&columns[i], &columns[j], alpha_level)?;
            totals[i] += si;
            totals[j] += sj;
        }
    }
    Ok(totals)
}
