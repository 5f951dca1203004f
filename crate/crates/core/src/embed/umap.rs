//! Uniform manifold approximation: fuzzy kNN graph plus SGD layout.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::knn::{knn_exact, knn_query, Knn};
use super::{validate_rows, Embedding, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::linalg::top_eigen;
use crate::scalar::Scalar;

const SIGMA_TOL: f64 = 1e-8;
const SIGMA_ITERS: usize = 256;
const MIN_K_DIST_SCALE: f64 = 1e-3;
/// Repulsive gradients use `max(d^2, REPULSION_FLOOR)` so coincident points stay finite.
pub const REPULSION_FLOOR: f64 = 1e-3;
const GRAD_CLIP: f64 = 4.0;

/// Per-point bandwidth calibration.
#[derive(Debug, Clone)]
pub struct Calibration<T> {
    pub sigmas: Vec<T>,
    pub rhos: Vec<T>,
}

/// `sum_j exp(-max(0, d_j - rho) / sigma)`.
pub fn membership_sum<T: Scalar>(dists: &[T], rho: T, sigma: T) -> f64 {
    let (rho, sigma) = (rho.as_f64(), sigma.as_f64());
    dists
        .iter()
        .map(|d| {
            let x = d.as_f64() - rho;
            if x > 0.0 {
                (-x / sigma).exp()
            } else {
                1.0
            }
        })
        .sum()
}

fn calibrate_one<T: Scalar>(dists: &[T], target: f64, mean_all: f64) -> (T, T) {
    let rho = dists.iter().map(|d| d.as_f64()).find(|&d| d > 0.0).unwrap_or(0.0);
    let rho_t = T::lit(rho);
    let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
    for _ in 0..SIGMA_ITERS {
        let psum = membership_sum(dists, rho_t, T::lit(mid));
        if (psum - target).abs() < SIGMA_TOL {
            break;
        }
        if psum > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    // All neighbours at or below rho: the sum no longer depends on sigma.
    let mean_i = dists.iter().map(|d| d.as_f64()).sum::<f64>() / dists.len().max(1) as f64;
    let floor = if rho > 0.0 { MIN_K_DIST_SCALE * mean_i } else { MIN_K_DIST_SCALE * mean_all };
    let sigma = if floor > 0.0 { mid.max(floor) } else { mid.max(f64::MIN_POSITIVE) };
    (T::lit(sigma), rho_t)
}

/// Binary search per point for `sigma` with `sum_j exp(-max(0, d_ij - rho_i)/sigma) = log2(k)`,
/// `rho_i` being the smallest positive neighbour distance (0 if none).
pub fn smooth_knn_dist<T: Scalar>(distances: &[Vec<T>], k: usize) -> Calibration<T> {
    let target = (k as f64).log2();
    let total: f64 = distances.iter().flatten().map(|d| d.as_f64()).sum();
    let count = distances.iter().map(|d| d.len()).sum::<usize>().max(1);
    let mean_all = total / count as f64;
    let (sigmas, rhos) = distances.iter().map(|d| calibrate_one(d, target, mean_all)).unzip();
    Calibration { sigmas, rhos }
}

/// Symmetric fuzzy graph in coordinate form; both `(i, j)` and `(j, i)` are
/// present, sorted by row then column.
#[derive(Debug, Clone)]
pub struct FuzzyGraph<T> {
    pub n: usize,
    pub edges: Vec<(usize, usize, T)>,
}

impl<T: Scalar> FuzzyGraph<T> {
    pub fn weight(&self, i: usize, j: usize) -> Option<T> {
        self.edges
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j)))
            .ok()
            .map(|p| self.edges[p].2)
    }

    pub fn degrees(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.n];
        for &(i, _, w) in &self.edges {
            d[i] += w;
        }
        d
    }
}

/// Directed memberships, combined by probabilistic union `a + b - ab`
/// (evaluated as `1 - (1-a)(1-b)` so a unit membership stays exactly 1).
pub fn fuzzy_graph<T: Scalar>(knn: &Knn<T>, cal: &Calibration<T>) -> FuzzyGraph<T> {
    let n = knn.indices.len();
    let mut pairs: BTreeMap<(usize, usize), (T, T)> = BTreeMap::new();
    for i in 0..n {
        for (&j, &d) in knn.indices[i].iter().zip(&knn.distances[i]) {
            let x = d - cal.rhos[i];
            let w = if x > T::zero() { (-x / cal.sigmas[i]).exp() } else { T::one() };
            let key = (i.min(j), i.max(j));
            let e = pairs.entry(key).or_insert((T::zero(), T::zero()));
            if i < j {
                e.0 = w;
            } else {
                e.1 = w;
            }
        }
    }
    let mut edges = Vec::with_capacity(pairs.len() * 2);
    for (&(i, j), &(a, b)) in &pairs {
        let w = T::one() - (T::one() - a) * (T::one() - b);
        if w > T::zero() {
            edges.push((i, j, w));
            edges.push((j, i, w));
        }
    }
    edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    FuzzyGraph { n, edges }
}

/// Least-squares fit of `1 / (1 + a d^(2b))` to the target curve that is 1
/// below `min_dist` and `exp(-(d - min_dist)/spread)` above, on 300 points in `[0, 3 spread]`.
pub fn find_ab_params(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| (1.0 / (1.0 + a * x.powf(2.0 * b)) - y).powi(2))
            .sum()
    };
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..500 {
        let (mut jtj, mut jtr) = ([0.0f64; 3], [0.0f64; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            let p = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
            let den = 1.0 + a * p;
            let f = 1.0 / den;
            let r = f - y;
            let da = -p / (den * den);
            let db = if x > 0.0 { -a * p * 2.0 * x.ln() / (den * den) } else { 0.0 };
            jtj[0] += da * da;
            jtj[1] += da * db;
            jtj[2] += db * db;
            jtr[0] += da * r;
            jtr[1] += db * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let m00 = jtj[0] * (1.0 + lambda);
            let m11 = jtj[2] * (1.0 + lambda);
            let det = m00 * m11 - jtj[1] * jtj[1];
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let sa = -(m11 * jtr[0] - jtj[1] * jtr[1]) / det;
            let sb = -(m00 * jtr[1] - jtj[1] * jtr[0]) / det;
            let (na, nb) = (a + sa, b + sb);
            if na > 0.0 && nb > 0.0 {
                let c = sse(na, nb);
                if c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    a = na;
                    b = nb;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

/// Attractive term of the edge cross-entropy, `-log q` with `q = 1/(1 + a d^(2b))`.
pub fn edge_attraction_loss<T: Scalar>(yi: &[T], yj: &[T], a: T, b: T) -> T {
    let d2 = crate::scalar::sq_dist(yi, yj);
    (T::one() + a * d2.powf(b)).ln()
}

/// Repulsive term, `-log(1 - q)`.
pub fn edge_repulsion_loss<T: Scalar>(yi: &[T], yj: &[T], a: T, b: T) -> T {
    let d2 = crate::scalar::sq_dist(yi, yj);
    let adb = a * d2.powf(b);
    (T::one() + adb).ln() - adb.ln()
}

/// Gradient of the attractive term w.r.t. `yi` is `attraction_coeff * (yi - yj)`.
#[inline]
pub fn attraction_coeff<T: Scalar>(d2: T, a: T, b: T) -> T {
    if d2 <= T::zero() {
        return T::zero();
    }
    T::lit(2.0) * a * b * d2.powf(b - T::one()) / (T::one() + a * d2.powf(b))
}

/// Gradient of the repulsive term w.r.t. `yi` is `repulsion_coeff * (yi - yj)`.
#[inline]
pub fn repulsion_coeff<T: Scalar>(d2: T, a: T, b: T) -> T {
    let d2f = d2.max(T::lit(REPULSION_FLOOR));
    -T::lit(2.0) * b / (d2f * (T::one() + a * d2.powf(b)))
}

pub fn edge_attraction_grad<T: Scalar>(yi: &[T], yj: &[T], a: T, b: T) -> Vec<T> {
    let c = attraction_coeff(crate::scalar::sq_dist(yi, yj), a, b);
    yi.iter().zip(yj).map(|(&p, &q)| c * (p - q)).collect()
}

pub fn edge_repulsion_grad<T: Scalar>(yi: &[T], yj: &[T], a: T, b: T) -> Vec<T> {
    let c = repulsion_coeff(crate::scalar::sq_dist(yi, yj), a, b);
    yi.iter().zip(yj).map(|(&p, &q)| c * (p - q)).collect()
}

/// Eigenvectors of the normalized graph Laplacian with the smallest non-trivial
/// eigenvalues, or `None` if the graph is too small or the solve misbehaves.
pub fn spectral_layout<T: Scalar>(graph: &FuzzyGraph<T>, dim: usize, seed: u64) -> Option<Vec<Vec<T>>> {
    let n = graph.n;
    if n < dim + 2 {
        return None;
    }
    let deg = graph.degrees();
    if deg.iter().any(|&d| d <= T::zero()) {
        return None;
    }
    let inv_sqrt: Vec<T> = deg.iter().map(|&d| T::one() / d.sqrt()).collect();
    let norm_d = deg.iter().copied().sum::<T>().sqrt();
    let trivial: Vec<T> = deg.iter().map(|&d| d.sqrt() / norm_d).collect();
    // (I + D^-1/2 W D^-1/2) minus its trivial top eigenvector, which is PSD.
    let op = |v: &[T], out: &mut [T]| {
        out.copy_from_slice(v);
        for &(i, j, w) in &graph.edges {
            out[i] += inv_sqrt[i] * w * inv_sqrt[j] * v[j];
        }
        let proj: T = trivial.iter().zip(v).map(|(&t, &x)| t * x).sum();
        for (o, &t) in out.iter_mut().zip(&trivial) {
            *o -= T::lit(2.0) * proj * t;
        }
    };
    let eig = top_eigen(n, dim, op, 1000, 1e-7, seed);
    let coords: Vec<Vec<T>> = (0..n).map(|i| eig.vectors.iter().map(|v| v[i]).collect()).collect();
    coords.iter().flatten().all(|v| v.is_finite()).then_some(coords)
}

fn initial_layout<T: Scalar>(graph: &FuzzyGraph<T>, dim: usize, rng: &mut ChaCha8Rng, seed: u64) -> Vec<Vec<T>> {
    match spectral_layout(graph, dim, seed) {
        Some(mut coords) => {
            let max = coords.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
            let expansion = if max > T::zero() { T::lit(10.0) / max } else { T::one() };
            let noise = Normal::new(0.0, 1e-4).unwrap();
            for v in coords.iter_mut().flatten() {
                *v = *v * expansion + T::lit(noise.sample(rng));
            }
            coords
        }
        None => (0..graph.n)
            .map(|_| (0..dim).map(|_| T::lit(rng.random_range(-10.0..10.0))).collect())
            .collect(),
    }
}

fn rescale_to_box<T: Scalar>(coords: &mut [Vec<T>], dim: usize) {
    for c in 0..dim {
        let lo = coords.iter().map(|r| r[c]).fold(T::infinity(), T::min);
        let hi = coords.iter().map(|r| r[c]).fold(T::neg_infinity(), T::max);
        let span = hi - lo;
        for r in coords.iter_mut() {
            r[c] = if span > T::zero() { T::lit(10.0) * (r[c] - lo) / span } else { T::lit(5.0) };
        }
    }
}

#[inline]
fn clip<T: Scalar>(v: T) -> T {
    let c = T::lit(GRAD_CLIP);
    v.max(-c).min(c)
}

/// Stochastic layout optimization with per-edge sampling rates proportional
/// to weight and `negative_sample_rate` random repulsions per positive sample.
#[allow(clippy::too_many_arguments)]
pub fn optimize_layout<T: Scalar>(
    coords: &mut [Vec<T>],
    graph: &FuzzyGraph<T>,
    a: T,
    b: T,
    n_epochs: usize,
    learning_rate: f64,
    negative_sample_rate: usize,
    rng: &mut ChaCha8Rng,
) {
    let n = coords.len();
    let w_max = graph.edges.iter().map(|e| e.2).fold(T::zero(), T::max);
    if w_max <= T::zero() || n_epochs == 0 {
        return;
    }
    let cutoff = w_max / T::from_usize_lossy(n_epochs);
    let edges: Vec<(usize, usize, f64)> = graph
        .edges
        .iter()
        .filter(|e| e.2 >= cutoff)
        .map(|e| (e.0, e.1, (w_max / e.2).as_f64()))
        .collect();
    let neg_rate = negative_sample_rate.max(1) as f64;
    let eps_neg: Vec<f64> = edges.iter().map(|e| e.2 / neg_rate).collect();
    let mut next_sample: Vec<f64> = edges.iter().map(|e| e.2).collect();
    let mut next_neg: Vec<f64> = eps_neg.clone();
    let dim = coords.first().map_or(0, |r| r.len());
    let mut delta = vec![T::zero(); dim];

    for epoch in 0..n_epochs {
        let e = epoch as f64;
        let alpha = T::lit(learning_rate * (1.0 - e / n_epochs as f64));
        for (idx, &(j, k, eps)) in edges.iter().enumerate() {
            if next_sample[idx] > e {
                continue;
            }
            let d2 = crate::scalar::sq_dist(&coords[j], &coords[k]);
            let c = attraction_coeff(d2, a, b);
            for d in 0..dim {
                delta[d] = clip(-c * (coords[j][d] - coords[k][d])) * alpha;
            }
            for d in 0..dim {
                coords[j][d] += delta[d];
                coords[k][d] -= delta[d];
            }
            next_sample[idx] += eps;

            let n_neg = ((e - next_neg[idx]) / eps_neg[idx]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let k = rng.random_range(0..n);
                if k == j {
                    continue;
                }
                let d2 = crate::scalar::sq_dist(&coords[j], &coords[k]);
                let c = repulsion_coeff(d2, a, b);
                for d in 0..dim {
                    let g = if d2 > T::zero() { clip(-c * (coords[j][d] - coords[k][d])) } else { T::lit(GRAD_CLIP) };
                    coords[j][d] += g * alpha;
                }
            }
            next_neg[idx] += n_neg as f64 * eps_neg[idx];
        }
    }
}

/// A fitted reduction that can place new points next to training points.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound(serialize = "T: serde::Serialize", deserialize = "T: serde::Deserialize<'de>"))]
pub struct UmapModel<T> {
    pub train: Vec<Vec<T>>,
    pub embedding: Vec<Vec<T>>,
    pub n_neighbors: usize,
}

impl<T: Scalar> UmapModel<T> {
    /// Membership-weighted average of the nearest training points' coordinates.
    pub fn transform(&self, row: &[T]) -> Vec<T> {
        let k = self.n_neighbors.min(self.train.len());
        let (idx, dists) = knn_query(&self.train, row, k);
        let cal = smooth_knn_dist(std::slice::from_ref(&dists), k.max(2));
        let (rho, sigma) = (cal.rhos[0], cal.sigmas[0]);
        let weights: Vec<T> = dists
            .iter()
            .map(|&d| {
                let x = d - rho;
                if x > T::zero() {
                    (-x / sigma).exp()
                } else {
                    T::one()
                }
            })
            .collect();
        let total: T = weights.iter().copied().sum();
        let dim = self.embedding.first().map_or(0, |r| r.len());
        let mut out = vec![T::zero(); dim];
        for (&i, &w) in idx.iter().zip(&weights) {
            for (o, &v) in out.iter_mut().zip(&self.embedding[i]) {
                *o += w / total * v;
            }
        }
        out
    }
}

fn check_config(n: usize, config: &EmbeddingConfig) -> Result<()> {
    if config.n_neighbors < 2 || config.n_neighbors >= n {
        return Err(Error::Precondition(format!(
            "n_neighbors must be in [2, N-1]; got {} with N = {n}",
            config.n_neighbors
        )));
    }
    if config.n_components == 0 {
        return Err(Error::Precondition("n_components must be at least 1".into()));
    }
    if !(config.spread > 0.0 && config.min_dist >= 0.0 && config.min_dist <= config.spread) {
        return Err(Error::Precondition(format!(
            "need 0 <= min_dist <= spread and spread > 0 (min_dist {}, spread {})",
            config.min_dist, config.spread
        )));
    }
    Ok(())
}

/// Fits the layout and returns it together with a model for new points.
pub fn fit_umap<T: Scalar>(rows: &[Vec<T>], config: &EmbeddingConfig) -> Result<(Embedding<T>, UmapModel<T>)> {
    validate_rows(rows)?;
    let n = rows.len();
    check_config(n, config)?;
    let k = config.n_neighbors;
    let knn = knn_exact(rows, k);
    let cal = smooth_knn_dist(&knn.distances, k);
    let graph = fuzzy_graph(&knn, &cal);
    let (a, b) = find_ab_params(config.spread, config.min_dist);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut coords = initial_layout(&graph, config.n_components, &mut rng, config.seed);
    rescale_to_box(&mut coords, config.n_components);
    optimize_layout(
        &mut coords,
        &graph,
        T::lit(a),
        T::lit(b),
        config.n_epochs,
        config.learning_rate,
        config.negative_sample_rate,
        &mut rng,
    );
    if coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Internal("layout produced non-finite coordinates".into()));
    }
    let mut e = Embedding::new(coords.clone(), config.n_components);
    e.config = Some(config.clone());
    let model = UmapModel {
        train: rows.to_vec(),
        embedding: coords,
        n_neighbors: k,
    };
    Ok((e, model))
}

pub fn reduce_umap<T: Scalar>(rows: &[Vec<T>], config: &EmbeddingConfig) -> Result<Embedding<T>> {
    fit_umap(rows, config).map(|(e, _)| e)
}
