use pitmap_core::cluster::{adjusted_rand_index, intra_inter_distances, silhouette};
use pitmap_core::embed::{reduce, reduce_pca, EmbeddingConfig, Method};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Three isotropic unit Gaussians in 50-D with centres 10 apart along distinct axes.
fn three_gaussians(n_per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<i64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..3 {
        for _ in 0..n_per {
            rows.push((0..50).map(|d| if d == c { 10.0 } else { 0.0 } + g.sample(&mut rng)).collect());
            labels.push(c as i64);
        }
    }
    (rows, labels)
}

#[test]
fn umap_separates_three_gaussians() {
    let (rows, labels) = three_gaussians(100, 11);
    let e = reduce(&rows, &EmbeddingConfig::default()).unwrap();
    assert_eq!(e.coords.len(), 300);
    assert!(e.coords.iter().flatten().all(|v| v.is_finite()));
    let s = silhouette(&e.coords, &labels).unwrap();
    assert!(s >= 0.8, "silhouette {s}");
    let (intra, inter) = intra_inter_distances(&e.coords, &labels);
    assert!(intra < inter);
}

#[test]
fn tsne_separates_three_gaussians() {
    let (rows, labels) = three_gaussians(100, 12);
    let cfg = EmbeddingConfig { method: Method::Tsne, ..Default::default() };
    let e = reduce(&rows, &cfg).unwrap();
    let s = silhouette(&e.coords, &labels).unwrap();
    assert!(s >= 0.7, "silhouette {s}");
    let (intra, inter) = intra_inter_distances(&e.coords, &labels);
    assert!(intra < inter);
}

#[test]
fn pca_orders_three_gaussians() {
    let (rows, labels) = three_gaussians(100, 13);
    let e = reduce_pca(&rows, 3).unwrap().embedding;
    let (intra, inter) = intra_inter_distances(&e.coords, &labels);
    assert!(intra < inter);
}

fn two_means(points: &[Vec<f64>]) -> Vec<i64> {
    // farthest pair as seeds, then Lloyd iterations
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut best = (0, 1, -1.0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let v = d(&points[i], &points[j]);
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    let mut c = [points[best.0].clone(), points[best.1].clone()];
    let mut labels = vec![0i64; points.len()];
    for _ in 0..50 {
        for (i, p) in points.iter().enumerate() {
            labels[i] = if d(p, &c[0]) <= d(p, &c[1]) { 0 } else { 1 };
        }
        for k in 0..2 {
            let m: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == k as i64).map(|(p, _)| p).collect();
            if !m.is_empty() {
                c[k] = (0..points[0].len()).map(|j| m.iter().map(|p| p[j]).sum::<f64>() / m.len() as f64).collect();
            }
        }
    }
    labels
}

#[test]
fn umap_tiny_set_full_neighbourhood() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = Normal::new(0.0, 0.5).unwrap();
    let rows: Vec<Vec<f64>> = (0..12)
        .map(|i| (0..5).map(|d| if d == 0 && i >= 6 { 8.0 } else { 0.0 } + g.sample(&mut rng)).collect())
        .collect();
    let truth: Vec<i64> = (0..12).map(|i| (i >= 6) as i64).collect();
    let cfg = EmbeddingConfig { n_neighbors: 11, ..Default::default() };
    let e = reduce(&rows, &cfg).unwrap();
    let found = two_means(&e.coords);
    assert_eq!(adjusted_rand_index(&found, &truth).unwrap(), 1.0);
}
