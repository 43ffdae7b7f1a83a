//! Multi-label propagation without clamping.
//!
//! Soft labels follow `F(t+1) = I_α T F(t) + (I - I_α) Y` whose fixed
//! point solves `(I - I_α T) F = (I - I_α) Y`. With `0 <= α_i < 1` every
//! entry of `F` stays in [0, 1]; rows are not normalized, so a sample can
//! have several classes above the 0.5 threshold.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::TransitionMatrix;
use crate::{check_binary, to_real, BinaryMatrix};

/// Per-sample damping factors `α_i ∈ [0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSchedule {
    alpha: Vec<f64>,
}

impl AlphaSchedule {
    pub const LABELED_DEFAULT: f64 = 0.6;
    pub const UNLABELED_DEFAULT: f64 = 0.999;

    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if let Some(i) = alpha.iter().position(|a| !(0.0..1.0).contains(a)) {
            return Err(Error::invalid(format!(
                "alpha[{i}] = {} is outside [0, 1)",
                alpha[i]
            )));
        }
        Ok(Self { alpha })
    }

    /// `labeled` for the first `l` samples, `unlabeled` for the remaining `n - l`.
    pub fn split(n: usize, l: usize, labeled: f64, unlabeled: f64) -> Result<Self> {
        if l > n {
            return Err(Error::invalid(format!("l = {l} exceeds n = {n}")));
        }
        let mut alpha = vec![labeled; l];
        alpha.resize(n, unlabeled);
        Self::new(alpha)
    }

    pub fn with_defaults(n: usize, l: usize) -> Result<Self> {
        Self::split(n, l, Self::LABELED_DEFAULT, Self::UNLABELED_DEFAULT)
    }

    pub fn values(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Class-membership probabilities, every entry in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelMatrix(DMatrix<f64>);

impl SoftLabelMatrix {
    pub fn new(f: DMatrix<f64>) -> Result<Self> {
        if let Some(v) = f.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("soft label {v} outside [0, 1]")));
        }
        Ok(Self(f))
    }

    // Solver output can overshoot the unit interval by a few ulps.
    fn from_solution(mut f: DMatrix<f64>) -> Self {
        f.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Self(f)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// `F̃`: hardened labels for the first `labeled` rows stacked over the soft
/// labels of the remaining rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoisedLabels {
    matrix: DMatrix<f64>,
    labeled: usize,
}

impl DenoisedLabels {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labeled(&self) -> usize {
        self.labeled
    }
}

/// Which linear solver [`propagate_direct_with`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// Dense LU up to [`DENSE_LIMIT`] samples, sparse CG above when possible.
    #[default]
    Auto,
    DenseLu,
    /// Conjugate gradients on the symmetrized system. Requires a transition
    /// matrix built by [`crate::graph::row_stochastic`].
    ConjugateGradient,
}

pub const DENSE_LIMIT: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

fn check_shapes(t: &TransitionMatrix, y0: &BinaryMatrix, alpha: &AlphaSchedule) -> Result<()> {
    let n = t.len();
    if y0.nrows() != n || alpha.len() != n {
        return Err(Error::invalid(format!(
            "shape mismatch: transition {n}x{n}, labels {}x{}, alpha {}",
            y0.nrows(),
            y0.ncols(),
            alpha.len()
        )));
    }
    check_binary(y0)
}

/// Runs the propagation update from `F(0) = Y` until the max-abs change
/// between iterates drops below `tol`.
pub fn propagate_iterative(
    t: &TransitionMatrix,
    y0: &BinaryMatrix,
    alpha: &AlphaSchedule,
    tol: f64,
    max_iter: usize,
) -> Result<SoftLabelMatrix> {
    check_shapes(t, y0, alpha)?;
    let y = to_real(y0);
    let a = alpha.values();
    let mut f = y.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = t.matrix().mul_dense(&f);
        for c in 0..next.ncols() {
            for i in 0..next.nrows() {
                next[(i, c)] = a[i] * next[(i, c)] + (1.0 - a[i]) * y[(i, c)];
            }
        }
        residual = (&next - &f).amax();
        f = next;
        if residual < tol {
            return Ok(SoftLabelMatrix::from_solution(f));
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        residual,
        last_iterate: Box::new(f),
    })
}

/// Solves `(I - I_α T) F = (I - I_α) Y` directly.
pub fn propagate_direct(
    t: &TransitionMatrix,
    y0: &BinaryMatrix,
    alpha: &AlphaSchedule,
) -> Result<SoftLabelMatrix> {
    propagate_direct_with(t, y0, alpha, LinearSolver::Auto)
}

pub fn propagate_direct_with(
    t: &TransitionMatrix,
    y0: &BinaryMatrix,
    alpha: &AlphaSchedule,
    solver: LinearSolver,
) -> Result<SoftLabelMatrix> {
    check_shapes(t, y0, alpha)?;
    let solver = match solver {
        LinearSolver::Auto if t.len() > DENSE_LIMIT && t.source_degrees().is_some() => {
            LinearSolver::ConjugateGradient
        }
        LinearSolver::Auto => LinearSolver::DenseLu,
        s => s,
    };
    let y = to_real(y0);
    let f = match solver {
        LinearSolver::ConjugateGradient => solve_cg(t, &y, alpha.values())?,
        _ => solve_lu(t, &y, alpha.values())?,
    };
    Ok(SoftLabelMatrix::from_solution(f))
}

fn solve_lu(t: &TransitionMatrix, y: &DMatrix<f64>, a: &[f64]) -> Result<DMatrix<f64>> {
    let n = t.len();
    let mut system = -t.to_dense();
    for i in 0..n {
        system.row_mut(i).scale_mut(a[i]);
        system[(i, i)] += 1.0;
    }
    let mut rhs = y.clone();
    for (i, &ai) in a.iter().enumerate() {
        rhs.row_mut(i).scale_mut(1.0 - ai);
    }
    system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("propagation system is singular".into()))
}

/// Dividing row i by α_i and multiplying by d̃_i turns the system into
/// `(D̃ I_α⁻¹ - W̃) F = D̃ (I_α⁻¹ - I) Y`, which is symmetric and strictly
/// diagonally dominant. Rows with α_i = 0 are fixed to `Y_i`.
fn solve_cg(t: &TransitionMatrix, y: &DMatrix<f64>, a: &[f64]) -> Result<DMatrix<f64>> {
    let degrees = t.source_degrees().ok_or_else(|| {
        Error::invalid("conjugate-gradient propagation needs a transition matrix built from a symmetric graph")
    })?;
    let n = t.len();
    let tm = t.matrix();
    let free: Vec<usize> = (0..n).filter(|&i| a[i] > 0.0).collect();
    let mut pos = vec![usize::MAX; n];
    for (p, &i) in free.iter().enumerate() {
        pos[i] = p;
    }
    let diag: Vec<f64> = free.iter().map(|&i| degrees[i] / a[i]).collect();
    let m = free.len();

    let apply = |x: &[f64], out: &mut [f64]| {
        for (p, &i) in free.iter().enumerate() {
            let mut off = 0.0;
            for (j, v) in tm.row(i) {
                if pos[j] != usize::MAX {
                    off += degrees[i] * v * x[pos[j]];
                }
            }
            out[p] = diag[p] * x[p] - off;
        }
    };

    let mut f = y.clone();
    for c in 0..y.ncols() {
        let b: Vec<f64> = free
            .iter()
            .map(|&i| {
                let mut v = degrees[i] * (1.0 / a[i] - 1.0) * y[(i, c)];
                for (j, w) in tm.row(i) {
                    if pos[j] == usize::MAX {
                        v += degrees[i] * w * y[(j, c)];
                    }
                }
                v
            })
            .collect();
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x: Vec<f64> = free.iter().map(|&i| y[(i, c)]).collect();
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
        } else {
            let mut ax = vec![0.0; m];
            apply(&x, &mut ax);
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
            let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
            let mut p = z.clone();
            let mut rz: f64 = r.iter().zip(&z).map(|(r, z)| r * z).sum();
            let mut ap = vec![0.0; m];
            let max_iter = 10 * m + 1000;
            let mut rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
            let mut it = 0;
            while rel > 1e-13 && it < max_iter {
                apply(&p, &mut ap);
                let pap: f64 = p.iter().zip(&ap).map(|(p, ap)| p * ap).sum();
                if pap <= 0.0 {
                    break;
                }
                let step = rz / pap;
                for k in 0..m {
                    x[k] += step * p[k];
                    r[k] -= step * ap[k];
                    z[k] = r[k] / diag[k];
                }
                let rz_next: f64 = r.iter().zip(&z).map(|(r, z)| r * z).sum();
                let beta = rz_next / rz;
                rz = rz_next;
                for k in 0..m {
                    p[k] = z[k] + beta * p[k];
                }
                rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
                it += 1;
            }
            if rel > 1e-10 {
                return Err(Error::Numeric(format!(
                    "conjugate gradients stalled at relative residual {rel:e} (column {c})"
                )));
            }
        }
        for (p, &i) in free.iter().enumerate() {
            f[(i, c)] = x[p];
        }
    }
    Ok(f)
}

/// `Ỹ_ic = 1` iff `F_ic > threshold` (strict).
pub fn harden(f: &SoftLabelMatrix, threshold: f64) -> BinaryMatrix {
    f.matrix().map(|v| u8::from(v > threshold))
}

/// Replaces the first `l` rows of `F` by their hardened labels.
pub fn assemble_f_tilde(f: &SoftLabelMatrix, l: usize) -> Result<DenoisedLabels> {
    let n = f.matrix().nrows();
    if l > n {
        return Err(Error::invalid(format!("l = {l} exceeds n = {n}")));
    }
    let mut matrix = f.matrix().clone();
    for i in 0..l {
        for c in 0..matrix.ncols() {
            matrix[(i, c)] = if matrix[(i, c)] > 0.5 { 1.0 } else { 0.0 };
        }
    }
    Ok(DenoisedLabels { matrix, labeled: l })
}
