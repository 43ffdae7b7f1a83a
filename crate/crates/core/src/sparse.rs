//! Minimal compressed-sparse-row storage for square graph matrices.

use nalgebra::DMatrix;

/// Row-compressed sparse matrix. Column indices within a row are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Entries are
    /// sorted by column; explicit zeros are dropped.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                debug_assert!(c < ncols);
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_rows(m.ncols(), rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over the stored `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Applies `f(row, col, value)` to every stored entry.
    pub fn map_entries(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                out.values[p] = f(i, self.indices[p], self.values[p]);
            }
        }
        out
    }

    /// Dense product `self * rhs`.
    pub fn mul_dense(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.ncols, rhs.nrows(), "dimension mismatch in sparse product");
        let mut out = DMatrix::zeros(self.nrows, rhs.ncols());
        for c in 0..rhs.ncols() {
            let src = rhs.column(c);
            for i in 0..self.nrows {
                let mut acc = 0.0;
                for (j, v) in self.row(i) {
                    acc += v * src[j];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    /// Sparse matrix-vector product into a caller-provided buffer.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.nrows) {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }
}
