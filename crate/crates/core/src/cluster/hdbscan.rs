//! Hierarchical density-based clustering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embed::knn_exact;
use crate::error::{Error, Result};
use crate::scalar::{cmp_f, dist, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    /// Neighbour rank used for core distances (self excluded).
    pub min_samples: usize,
}

impl ClusterParams {
    /// `max(15, n / 100)` and 10.
    pub fn for_size(n: usize) -> Self {
        ClusterParams {
            min_cluster_size: (n / 100).max(15),
            min_samples: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabeling {
    /// Cluster index in `0..n_clusters`, or -1 for noise.
    pub labels: Vec<i64>,
    /// Membership strength in `[0, 1]`; 0 for noise.
    pub strengths: Vec<f64>,
    pub n_clusters: usize,
    pub warnings: Vec<String>,
}

impl ClusterLabeling {
    pub fn noise_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&l| l < 0).count() as f64 / self.labels.len().max(1) as f64
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == cluster as i64)
            .collect()
    }
}

/// Distance from each point to its `min_samples`-th nearest other point.
pub fn core_distances<T: Scalar>(rows: &[Vec<T>], min_samples: usize) -> Result<Vec<T>> {
    if min_samples == 0 || rows.len() < min_samples + 1 {
        return Err(Error::Precondition(format!(
            "core distances with min_samples={min_samples} need at least {} points, have {}",
            min_samples + 1,
            rows.len()
        )));
    }
    let knn = knn_exact(rows, min_samples);
    Ok(knn.distances.into_iter().map(|d| d[min_samples - 1]).collect())
}

#[inline]
fn mreach<T: Scalar>(rows: &[Vec<T>], core: &[T], a: usize, b: usize) -> T {
    dist(&rows[a], &rows[b]).max(core[a]).max(core[b])
}

/// Dense mutual reachability matrix; the diagonal is 0.
pub fn mutual_reachability<T: Scalar>(rows: &[Vec<T>], min_samples: usize) -> Result<Vec<Vec<T>>> {
    let core = core_distances(rows, min_samples)?;
    let n = rows.len();
    Ok((0..n)
        .map(|a| (0..n).map(|b| if a == b { T::zero() } else { mreach(rows, &core, a, b) }).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge<T> {
    pub a: usize,
    pub b: usize,
    pub weight: T,
}

/// Prim's algorithm on the complete mutual reachability graph.
pub fn minimum_spanning_tree<T: Scalar>(rows: &[Vec<T>], core: &[T]) -> Vec<MstEdge<T>> {
    let n = rows.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![T::infinity(); n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut cur = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let w = mreach(rows, core, cur, v);
            if w < best[v] {
                best[v] = w;
                from[v] = cur;
            }
            if next == usize::MAX || best[v] < best[next] {
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge {
            a: from[next],
            b: next,
            weight: best[next],
        });
        cur = next;
    }
    edges
}

/// One row of the condensed tree: `child` (a point `< n` or a cluster `>= n`)
/// leaves `parent` at density `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensedEntry {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    pub n_points: usize,
    pub entries: Vec<CondensedEntry>,
}

impl CondensedTree {
    pub fn root(&self) -> usize {
        self.n_points
    }

    pub fn cluster_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = std::iter::once(self.root())
            .chain(self.entries.iter().filter(|e| e.child >= self.n_points).map(|e| e.child))
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Excess of mass of every cluster: sum over leaving children of
    /// `(lambda_leave - lambda_birth) * size`.
    pub fn stabilities(&self) -> BTreeMap<usize, f64> {
        let mut birth: BTreeMap<usize, f64> = BTreeMap::new();
        birth.insert(self.root(), 0.0);
        for e in &self.entries {
            if e.child >= self.n_points {
                birth.insert(e.child, e.lambda);
            }
        }
        let mut stab: BTreeMap<usize, f64> = birth.keys().map(|&c| (c, 0.0)).collect();
        for e in &self.entries {
            *stab.get_mut(&e.parent).unwrap() += (e.lambda - birth[&e.parent]) * e.size as f64;
        }
        stab
    }
}

struct Dendrogram {
    /// Internal nodes; node id `n + i` is `nodes[i]`.
    nodes: Vec<(Vec<usize>, f64, usize)>,
    n: usize,
}

impl Dendrogram {
    fn size(&self, id: usize) -> usize {
        if id < self.n {
            1
        } else {
            self.nodes[id - self.n].2
        }
    }

    fn leaves(&self, id: usize, out: &mut Vec<usize>) {
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            if v < self.n {
                out.push(v);
            } else {
                stack.extend(self.nodes[v - self.n].0.iter().rev());
            }
        }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-linkage hierarchy in which all joins at one exact distance form a
/// single multi-way node, so the result does not depend on tie order.
fn dendrogram(n: usize, mst: &[MstEdge<f64>]) -> Dendrogram {
    let mut sorted: Vec<&MstEdge<f64>> = mst.iter().collect();
    sorted.sort_by(|x, y| cmp_f(&x.weight, &y.weight).then((x.a, x.b).cmp(&(y.a, y.b))));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut nodes: Vec<(Vec<usize>, f64, usize)> = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let w = sorted[i].weight;
        let mut pending: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        while i < sorted.len() && sorted[i].weight == w {
            let (ra, rb) = (find(&mut parent, sorted[i].a), find(&mut parent, sorted[i].b));
            let mut la = pending.remove(&ra).unwrap_or_else(|| vec![node_of[ra]]);
            let lb = pending.remove(&rb).unwrap_or_else(|| vec![node_of[rb]]);
            la.extend(lb);
            let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[drop] = keep;
            pending.insert(keep, la);
            i += 1;
        }
        for (root, children) in pending {
            let size = children
                .iter()
                .map(|&c| if c < n { 1 } else { nodes[c - n].2 })
                .sum::<usize>();
            nodes.push((children, w, size));
            node_of[root] = n + nodes.len() - 1;
        }
    }
    Dendrogram { nodes, n }
}

fn lambda_of(d: f64, zero_lambda: f64) -> f64 {
    if d > 0.0 {
        1.0 / d
    } else {
        zero_lambda
    }
}

/// Condenses the hierarchy at `min_cluster_size`. Splits with at least two
/// sides of that size create child clusters; smaller sides fall out as points.
pub fn condense_tree(n: usize, mst: &[MstEdge<f64>], min_cluster_size: usize) -> CondensedTree {
    let dendro = dendrogram(n, mst);
    let min_pos = mst.iter().map(|e| e.weight).filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
    let zero_lambda = if min_pos.is_finite() { 1e3 / min_pos } else { 1.0 };
    let mut entries = Vec::new();
    let Some(top) = (n + dendro.nodes.len()).checked_sub(1).filter(|&t| t >= n) else {
        return CondensedTree { n_points: n, entries };
    };
    let mut next_id = n + 1;
    let mut stack = vec![(top, n)];
    let mut buf = Vec::new();
    while let Some((node, cluster)) = stack.pop() {
        if node < n {
            continue;
        }
        let (children, d, _) = &dendro.nodes[node - n];
        let lambda = lambda_of(*d, zero_lambda);
        let big: Vec<usize> = children
            .iter()
            .copied()
            .filter(|&c| dendro.size(c) >= min_cluster_size)
            .collect();
        let mut fall_out = |c: usize, entries: &mut Vec<CondensedEntry>| {
            buf.clear();
            dendro.leaves(c, &mut buf);
            for &p in buf.iter() {
                entries.push(CondensedEntry { parent: cluster, child: p, lambda, size: 1 });
            }
        };
        let mut descend = Vec::new();
        for &c in children {
            let is_big = dendro.size(c) >= min_cluster_size;
            if !is_big {
                fall_out(c, &mut entries);
            } else if big.len() >= 2 {
                let id = next_id;
                next_id += 1;
                entries.push(CondensedEntry { parent: cluster, child: id, lambda, size: dendro.size(c) });
                descend.push((c, id));
            } else {
                descend.push((c, cluster));
            }
        }
        stack.extend(descend.into_iter().rev());
    }
    CondensedTree { n_points: n, entries }
}

/// Excess-of-mass selection, never selecting the root.
pub fn select_clusters(tree: &CondensedTree) -> Vec<usize> {
    let mut stab = tree.stabilities();
    let root = tree.root();
    let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in &tree.entries {
        if e.child >= tree.n_points {
            children.entry(e.parent).or_default().push(e.child);
        }
    }
    let ids: Vec<usize> = stab.keys().copied().filter(|&c| c != root).collect();
    let mut selected: BTreeMap<usize, bool> = ids.iter().map(|&c| (c, true)).collect();
    for &node in ids.iter().rev() {
        let sub: f64 = children.get(&node).map_or(0.0, |cs| cs.iter().map(|c| stab[c]).sum());
        if sub > stab[&node] {
            selected.insert(node, false);
            stab.insert(node, sub);
        } else {
            let mut stack: Vec<usize> = children.get(&node).cloned().unwrap_or_default();
            while let Some(c) = stack.pop() {
                selected.insert(c, false);
                if let Some(cs) = children.get(&c) {
                    stack.extend(cs);
                }
            }
        }
    }
    selected.into_iter().filter(|&(_, s)| s).map(|(c, _)| c).collect()
}

/// Labels and strengths from a condensed tree and its selected clusters.
pub fn label_points(tree: &CondensedTree, selected: &[usize]) -> (Vec<i64>, Vec<f64>) {
    let n = tree.n_points;
    let mut cluster_parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut point_parent = vec![usize::MAX; n];
    let mut point_lambda = vec![0.0; n];
    for e in &tree.entries {
        if e.child >= n {
            cluster_parent.insert(e.child, e.parent);
        } else {
            point_parent[e.child] = e.parent;
            point_lambda[e.child] = e.lambda;
        }
    }
    let index: BTreeMap<usize, i64> = selected.iter().enumerate().map(|(i, &c)| (c, i as i64)).collect();
    let mut labels = vec![-1i64; n];
    for p in 0..n {
        let mut c = point_parent[p];
        while c != usize::MAX {
            if let Some(&l) = index.get(&c) {
                labels[p] = l;
                break;
            }
            c = cluster_parent.get(&c).copied().unwrap_or(usize::MAX);
        }
    }
    let mut max_lambda = vec![0.0f64; selected.len()];
    for p in 0..n {
        if labels[p] >= 0 {
            let m = &mut max_lambda[labels[p] as usize];
            *m = m.max(point_lambda[p]);
        }
    }
    let strengths = (0..n)
        .map(|p| {
            if labels[p] < 0 {
                0.0
            } else {
                let m = max_lambda[labels[p] as usize];
                if m > 0.0 && m.is_finite() {
                    (point_lambda[p] / m).min(1.0)
                } else {
                    1.0
                }
            }
        })
        .collect();
    (labels, strengths)
}

/// Full pipeline: core distances, MST, condensed tree, excess-of-mass
/// extraction. Identical input points form one cluster.
pub fn hdbscan<T: Scalar>(rows: &[Vec<T>], params: &ClusterParams) -> Result<ClusterLabeling> {
    crate::embed::validate_rows(rows)?;
    let n = rows.len();
    if params.min_cluster_size < 2 || params.min_samples < 1 {
        return Err(Error::Precondition("need min_cluster_size >= 2 and min_samples >= 1".into()));
    }
    if n < 2 * params.min_cluster_size {
        return Err(Error::Precondition(format!(
            "{n} points is fewer than 2 x min_cluster_size ({})",
            params.min_cluster_size
        )));
    }
    let core = core_distances(rows, params.min_samples)?;
    let mst: Vec<MstEdge<f64>> = minimum_spanning_tree(rows, &core)
        .into_iter()
        .map(|e| MstEdge { a: e.a, b: e.b, weight: e.weight.as_f64() })
        .collect();
    if mst.iter().all(|e| e.weight == 0.0) {
        return Ok(ClusterLabeling {
            labels: vec![0; n],
            strengths: vec![1.0; n],
            n_clusters: 1,
            warnings: vec!["all points identical; returning one cluster".into()],
        });
    }
    let tree = condense_tree(n, &mst, params.min_cluster_size);
    let selected = select_clusters(&tree);
    let (labels, strengths) = label_points(&tree, &selected);
    let mut warnings = Vec::new();
    if selected.is_empty() {
        warnings.push("no cluster found; all points are noise".into());
    }
    Ok(ClusterLabeling {
        labels,
        strengths,
        n_clusters: selected.len(),
        warnings,
    })
}
