use rayon::prelude::*;

use crate::scalar::{cmp_f, dist, Scalar};

/// Exact k nearest neighbours, excluding the query point itself.
#[derive(Debug, Clone)]
pub struct Knn<T> {
    /// `indices[i]` sorted by increasing distance, ties by index.
    pub indices: Vec<Vec<usize>>,
    pub distances: Vec<Vec<T>>,
}

/// Brute-force Euclidean kNN. `k` is clamped to `n - 1`.
pub fn knn_exact<T: Scalar>(rows: &[Vec<T>], k: usize) -> Knn<T> {
    let n = rows.len();
    let k = k.min(n.saturating_sub(1));
    let per_point: Vec<(Vec<usize>, Vec<T>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut all: Vec<(T, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist(&rows[i], &rows[j]), j))
                .collect();
            let by = |a: &(T, usize), b: &(T, usize)| cmp_f(&a.0, &b.0).then(a.1.cmp(&b.1));
            if k < all.len() {
                all.select_nth_unstable_by(k, by);
                all.truncate(k);
            }
            all.sort_by(by);
            all.into_iter().map(|(d, j)| (j, d)).unzip()
        })
        .collect();
    let (indices, distances) = per_point.into_iter().unzip();
    Knn { indices, distances }
}

/// Neighbours of an out-of-sample query among `rows`.
pub(crate) fn knn_query<T: Scalar>(rows: &[Vec<T>], query: &[T], k: usize) -> (Vec<usize>, Vec<T>) {
    let mut all: Vec<(T, usize)> = rows.iter().enumerate().map(|(j, r)| (dist(query, r), j)).collect();
    all.sort_by(|a, b| cmp_f(&a.0, &b.0).then(a.1.cmp(&b.1)));
    all.truncate(k.min(rows.len()));
    all.into_iter().map(|(d, j)| (j, d)).unzip()
}
