use super::{validate_rows, Embedding};
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, top_eigen};
use crate::scalar::Scalar;

/// Dense covariance eigendecomposition is used up to this dimension; above it
/// the top components come from subspace iteration on the implicit covariance.
const DENSE_LIMIT: usize = 200;

#[derive(Debug, Clone)]
pub struct Pca<T> {
    pub mean: Vec<T>,
    /// Unit principal directions, by decreasing variance.
    pub components: Vec<Vec<T>>,
    pub explained_variance: Vec<T>,
    pub embedding: Embedding<T>,
}

impl<T: Scalar> Pca<T> {
    pub fn transform(&self, row: &[T]) -> Vec<T> {
        self.components
            .iter()
            .map(|c| c.iter().zip(row).zip(&self.mean).map(|((&w, &x), &m)| w * (x - m)).sum())
            .collect()
    }

    pub fn explained_ratio(&self) -> Vec<T> {
        let total: T = self.explained_variance.iter().copied().sum();
        self.explained_variance
            .iter()
            .map(|&v| if total > T::zero() { v / total } else { T::zero() })
            .collect()
    }
}

/// Projects mean-centered rows onto the top `k` principal directions.
///
/// Each direction's sign makes its largest-magnitude loading positive.
pub fn reduce_pca<T: Scalar>(rows: &[Vec<T>], k: usize) -> Result<Pca<T>> {
    let dim = validate_rows(rows)?;
    let n = rows.len();
    if k == 0 || n < k || dim < k {
        return Err(Error::Precondition(format!(
            "PCA with k={k} needs at least k points and k dimensions (have {n} x {dim})"
        )));
    }
    let nt = T::from_usize_lossy(n);
    let mut mean = vec![T::zero(); dim];
    for r in rows {
        for (m, &x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nt);
    let centered: Vec<Vec<T>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(&x, &m)| x - m).collect())
        .collect();

    let eig = if dim <= DENSE_LIMIT {
        let mut cov = vec![T::zero(); dim * dim];
        for r in &centered {
            for i in 0..dim {
                if r[i] == T::zero() {
                    continue;
                }
                for j in i..dim {
                    cov[i * dim + j] += r[i] * r[j];
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov[i * dim + j] / nt;
                cov[i * dim + j] = v;
                cov[j * dim + i] = v;
            }
        }
        let mut e = jacobi_eigen(&cov, dim);
        e.values.truncate(k);
        e.vectors.truncate(k);
        e
    } else {
        top_eigen(
            dim,
            k,
            |v: &[T], out: &mut [T]| {
                out.iter_mut().for_each(|o| *o = T::zero());
                for r in &centered {
                    let s: T = r.iter().zip(v).map(|(&a, &b)| a * b).sum::<T>() / nt;
                    for (o, &a) in out.iter_mut().zip(r) {
                        *o += s * a;
                    }
                }
            },
            1000,
            1e-10,
            0,
        )
    };

    let total_var: T = centered.iter().flatten().map(|x| x.pow2()).sum();
    let mut warnings = Vec::new();
    if total_var <= T::zero() {
        warnings.push("all points identical; PCA embedding is zero".to_string());
        let mut embedding = Embedding::new(vec![vec![T::zero(); k]; n], k);
        embedding.warnings = warnings;
        return Ok(Pca {
            mean,
            components: vec![vec![T::zero(); dim]; k],
            explained_variance: vec![T::zero(); k],
            embedding,
        });
    }

    let components: Vec<Vec<T>> = eig
        .vectors
        .into_iter()
        .map(|mut v| {
            let lead = v
                .iter()
                .copied()
                .fold(T::zero(), |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if lead < T::zero() {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let explained_variance = eig.values.iter().map(|&v| v.max(T::zero())).collect();
    let mut pca = Pca {
        mean,
        components,
        explained_variance,
        embedding: Embedding::new(Vec::new(), k),
    };
    let coords = rows.iter().map(|r| pca.transform(r)).collect();
    pca.embedding = Embedding::new(coords, k);
    pca.embedding.warnings = warnings;
    Ok(pca)
}
