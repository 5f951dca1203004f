//! Brute-force references for spanning trees and density-based clustering.
#![allow(dead_code)]

use std::collections::BTreeMap;

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mutual reachability with core distance = k-th smallest distance to another point.
pub fn brute_mreach(rows: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let n = rows.len();
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| euclid(&rows[i], &rows[j])).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d[k - 1]
        })
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { euclid(&rows[i], &rows[j]).max(core[i]).max(core[j]) })
                .collect()
        })
        .collect()
}

/// Minimum spanning-tree weight by decoding every Pruefer sequence.
pub fn exhaustive_mst_weight(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 2 {
        return m[0][1];
    }
    let len = n - 2;
    let mut seq = vec![0usize; len];
    let mut best = f64::INFINITY;
    loop {
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut w = 0.0;
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            w += m[leaf][s];
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        w += m[rest[0]][rest[1]];
        best = best.min(w);
        let mut i = 0;
        loop {
            if i == len {
                return best;
            }
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
    }
}

/// Cycle-property certificate: every non-tree edge weighs at least the
/// heaviest tree edge on the path between its ends.
pub fn is_minimum_spanning_tree(m: &[Vec<f64>], edges: &[(usize, usize)]) -> bool {
    let n = m.len();
    if edges.len() != n - 1 {
        return false;
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for s in 0..n {
        // heaviest edge on the tree path from s to every vertex
        let mut heavy = vec![f64::NAN; n];
        heavy[s] = 0.0;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if heavy[u].is_nan() {
                    heavy[u] = heavy[v].max(m[v][u]);
                    stack.push(u);
                }
            }
        }
        if heavy.iter().any(|h| h.is_nan()) {
            return false;
        }
        for t in 0..n {
            if t != s && m[s][t] < heavy[t] {
                return false;
            }
        }
    }
    true
}

fn components(points: &[usize], m: &[Vec<f64>], below: f64) -> Vec<Vec<usize>> {
    let mut seen = vec![false; points.len()];
    let mut out = Vec::new();
    for start in 0..points.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![points[start]];
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for j in 0..points.len() {
                if !seen[j] && m[points[i]][points[j]] < below {
                    seen[j] = true;
                    comp.push(points[j]);
                    stack.push(j);
                }
            }
        }
        out.push(comp);
    }
    out
}

struct RefCluster {
    birth: f64,
    stability: f64,
    children: Vec<usize>,
    /// Points that left this cluster directly.
    fallen: Vec<usize>,
}

fn grow(points: Vec<usize>, birth: f64, m: &[Vec<f64>], mcs: usize, out: &mut Vec<RefCluster>) -> usize {
    let id = out.len();
    out.push(RefCluster { birth, stability: 0.0, children: vec![], fallen: vec![] });
    let mut live = points;
    let mut levels: Vec<f64> = live
        .iter()
        .flat_map(|&a| live.iter().filter(move |&&b| b > a).map(move |&b| m[a][b]))
        .collect();
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap());
    levels.dedup();
    for w in levels {
        if live.is_empty() {
            break;
        }
        let comps = components(&live, m, w);
        if comps.len() == 1 {
            continue;
        }
        let lambda = 1.0 / w;
        let big: Vec<&Vec<usize>> = comps.iter().filter(|c| c.len() >= mcs).collect();
        for c in comps.iter().filter(|c| c.len() < mcs) {
            for &p in c {
                out[id].fallen.push(p);
                out[id].stability += lambda - birth;
            }
        }
        match big.len() {
            0 => {
                live.clear();
            }
            1 => {
                live = big[0].clone();
            }
            _ => {
                for c in big {
                    out[id].stability += (lambda - birth) * c.len() as f64;
                    let child = grow(c.clone(), lambda, m, mcs, out);
                    out[id].children.push(child);
                }
                live.clear();
            }
        }
    }
    id
}

fn select(c: usize, tree: &[RefCluster]) -> (f64, Vec<usize>) {
    if tree[c].children.is_empty() {
        return (tree[c].stability, vec![c]);
    }
    let mut sub = 0.0;
    let mut chosen = Vec::new();
    for &ch in &tree[c].children {
        let (s, sel) = select(ch, tree);
        sub += s;
        chosen.extend(sel);
    }
    if sub > tree[c].stability {
        (sub, chosen)
    } else {
        (tree[c].stability, vec![c])
    }
}

/// Reference labels, each cluster named by its smallest member index; noise is -1.
pub fn reference_labels(rows: &[Vec<f64>], min_cluster_size: usize, min_samples: usize) -> Vec<i64> {
    let n = rows.len();
    let m = brute_mreach(rows, min_samples);
    let mut tree = Vec::new();
    grow((0..n).collect(), 0.0, &m, min_cluster_size, &mut tree);
    let selected: Vec<usize> = tree[0].children.iter().flat_map(|&c| select(c, &tree).1).collect();
    let mut labels = vec![-1i64; n];
    fn mark(c: usize, tree: &[RefCluster], label: i64, labels: &mut [i64]) {
        for &p in &tree[c].fallen {
            labels[p] = label;
        }
        for &ch in &tree[c].children {
            mark(ch, tree, label, labels);
        }
    }
    for (k, &c) in selected.iter().enumerate() {
        mark(c, &tree, k as i64, &mut labels);
    }
    canonical(&labels)
}

/// Renames clusters by their smallest member index.
pub fn canonical(labels: &[i64]) -> Vec<i64> {
    let mut first: BTreeMap<i64, i64> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            first.entry(l).or_insert(i as i64);
        }
    }
    labels.iter().map(|&l| if l < 0 { -1 } else { first[&l] }).collect()
}
