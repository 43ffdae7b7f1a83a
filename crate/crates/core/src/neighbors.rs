//! Brute-force Euclidean nearest-neighbor search.
//!
//! Candidates are ordered by `(squared distance, index)`, so distance ties
//! always resolve to the smaller sample index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

/// Row-major copy of a sample matrix for cache-friendly distance loops.
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let dim = m.ncols();
        let mut data = Vec::with_capacity(m.nrows() * dim);
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        Self { dim, data }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Keeps the `k` smallest candidates seen so far.
struct BoundedHeap {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl BoundedHeap {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(top) = self.heap.peek() {
            if c < *top {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    fn into_sorted(self) -> Vec<usize> {
        self.heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
    }
}

/// The `k` nearest neighbors of every point among the other points of the
/// set (a point is never its own neighbor, duplicates are). Each list is
/// ordered nearest first. Requires `k < points.len()`.
pub fn all_knn(points: &PointSet, k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    assert!(k < n, "k must be smaller than the number of points");
    let mut heaps: Vec<BoundedHeap> = (0..n).map(|_| BoundedHeap::new(k)).collect();
    for i in 0..n {
        let pi = points.point(i);
        for j in (i + 1)..n {
            let dist = squared_distance(pi, points.point(j));
            heaps[i].offer(Candidate { dist, index: j });
            heaps[j].offer(Candidate { dist, index: i });
        }
    }
    heaps.into_iter().map(BoundedHeap::into_sorted).collect()
}

/// The `k` nearest points of the set to `query`, nearest first.
pub fn query_knn(points: &PointSet, query: &[f64], k: usize) -> Vec<usize> {
    let mut heap = BoundedHeap::new(k.min(points.len()));
    for j in 0..points.len() {
        heap.offer(Candidate {
            dist: squared_distance(query, points.point(j)),
            index: j,
        });
    }
    heap.into_sorted()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &PointSet, i: usize, k: usize) -> Vec<usize> {
        let mut c: Vec<(f64, usize)> = (0..points.len())
            .filter(|&j| j != i)
            .map(|j| {
                let d: f64 = points
                    .point(i)
                    .iter()
                    .zip(points.point(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d, j)
            })
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        c.into_iter().take(k).map(|(_, j)| j).collect()
    }

    #[test]
    fn ties_resolve_to_smaller_index() {
        let m = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, -1.0, 1.0]);
        let ps = PointSet::from_matrix(&m);
        let nn = all_knn(&ps, 2);
        assert_eq!(nn[0], vec![1, 2]);
        assert_eq!(nn[1], vec![3, 0]);
        assert_eq!(query_knn(&ps, &[0.0], 3), vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn matches_sorted_brute_force(
            vals in proptest::collection::vec(-3i32..3, 3 * 12),
            k in 1usize..11,
        ) {
            // Small integer coordinates force plenty of distance ties.
            let m = DMatrix::from_row_slice(12, 3, &vals.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let ps = PointSet::from_matrix(&m);
            let nn = all_knn(&ps, k);
            for (i, list) in nn.iter().enumerate() {
                prop_assert_eq!(list, &brute(&ps, i, k));
            }
        }
    }
}
