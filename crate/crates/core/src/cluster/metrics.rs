//! Partition agreement and cluster quality scores.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::{dist, Scalar};

fn comb2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same points. Every label
/// value, including -1, is treated as its own group.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "labelings differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let mut table: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut rows: BTreeMap<i64, usize> = BTreeMap::new();
    let mut cols: BTreeMap<i64, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(a.len());
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        // both partitions trivial in the same way
        return Ok(if sum_a == sum_b && index == sum_a { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Mean silhouette over non-noise points (label >= 0). Members of singleton
/// clusters score 0.
pub fn silhouette<T: Scalar>(points: &[Vec<T>], labels: &[i64]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::InvalidInput("points and labels differ in length".into()));
    }
    let idx: Vec<usize> = (0..points.len()).filter(|&i| labels[i] >= 0).collect();
    let mut clusters: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for &i in &idx {
        clusters.entry(labels[i]).or_default().push(i);
    }
    if clusters.len() < 2 {
        return Err(Error::Precondition("silhouette needs at least two clusters".into()));
    }
    let mut total = 0.0;
    for &i in &idx {
        let own = &clusters[&labels[i]];
        if own.len() == 1 {
            continue;
        }
        let mean_to = |members: &[usize]| -> f64 {
            members
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| dist(&points[i], &points[j]).as_f64())
                .sum::<f64>()
        };
        let a = mean_to(own) / (own.len() - 1) as f64;
        let b = clusters
            .iter()
            .filter(|(&l, _)| l != labels[i])
            .map(|(_, m)| mean_to(m) / m.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / idx.len() as f64)
}

/// Mean pairwise distance within and across labels, over non-noise points.
pub fn intra_inter_distances<T: Scalar>(points: &[Vec<T>], labels: &[i64]) -> (f64, f64) {
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if labels[i] < 0 || labels[j] < 0 {
                continue;
            }
            let d = dist(&points[i], &points[j]).as_f64();
            if labels[i] == labels[j] {
                intra += d;
                ni += 1;
            } else {
                inter += d;
                nx += 1;
            }
        }
    }
    (intra / ni.max(1) as f64, inter / nx.max(1) as f64)
}
