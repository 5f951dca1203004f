//! Small dense symmetric eigen-solvers used by PCA and spectral initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{cmp_f, Scalar};

/// Eigenpairs sorted by decreasing eigenvalue; `vectors[i]` pairs with `values[i]`.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

/// Cyclic Jacobi rotation for a dense symmetric `n x n` row-major matrix.
pub fn jacobi_eigen<T: Scalar>(matrix: &[T], n: usize) -> SymEigen<T> {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let x = a[i * n + j].pow2();
                total += x;
                if i != j {
                    off += x;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| cmp_f(&a[j * n + j], &a[i * n + i]).then(i.cmp(&j)));
    SymEigen {
        values: order.iter().map(|&i| a[i * n + i]).collect(),
        vectors: order
            .iter()
            .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
            .collect(),
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Modified Gram-Schmidt in place. Columns that collapse are replaced by
/// zero vectors; returns how many stayed independent.
pub fn orthonormalize<T: Scalar>(cols: &mut [Vec<T>]) -> usize {
    let mut rank = 0;
    for i in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(i);
        let v = &mut rest[0];
        let before = norm(v);
        for _ in 0..2 {
            for u in done.iter() {
                let proj = dot(u, v);
                for (x, &y) in v.iter_mut().zip(u) {
                    *x -= proj * y;
                }
            }
        }
        let nv = norm(v);
        if nv > T::lit(1e-10) * before.max(T::min_positive_value()) && nv > T::zero() {
            for x in v.iter_mut() {
                *x /= nv;
            }
            rank += 1;
        } else {
            v.iter_mut().for_each(|x| *x = T::zero());
        }
    }
    rank
}

/// Largest `k` eigenpairs of an implicit symmetric positive semi-definite
/// operator by block subspace iteration with Rayleigh-Ritz refinement.
pub fn top_eigen<T, F>(n: usize, k: usize, matvec: F, max_iter: usize, tol: f64, seed: u64) -> SymEigen<T>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]),
{
    let k = k.min(n);
    let p = (k + 6).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<T>> = (0..p)
        .map(|_| (0..n).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect())
        .collect();
    orthonormalize(&mut basis);
    let mut images = vec![vec![T::zero(); n]; p];
    let mut result = SymEigen {
        values: vec![T::zero(); k],
        vectors: vec![vec![T::zero(); n]; k],
    };
    for iter in 0..max_iter {
        for (b, img) in basis.iter().zip(images.iter_mut()) {
            matvec(b, img);
        }
        // Rayleigh-Ritz on span(basis)
        let mut h = vec![T::zero(); p * p];
        for i in 0..p {
            for j in i..p {
                let v = dot(&basis[i], &images[j]);
                h[i * p + j] = v;
                h[j * p + i] = v;
            }
        }
        let small = jacobi_eigen(&h, p);
        let rotate = |cols: &[Vec<T>]| -> Vec<Vec<T>> {
            small
                .vectors
                .iter()
                .map(|coef| {
                    let mut out = vec![T::zero(); n];
                    for (c, col) in coef.iter().zip(cols) {
                        for (o, &x) in out.iter_mut().zip(col) {
                            *o += *c * x;
                        }
                    }
                    out
                })
                .collect()
        };
        let ritz = rotate(&basis);
        let ritz_img = rotate(&images);
        let scale = small.values[0].abs().max(T::min_positive_value());
        let mut converged = true;
        for i in 0..k {
            let lambda = small.values[i];
            let resid: T = ritz_img[i]
                .iter()
                .zip(&ritz[i])
                .map(|(&av, &v)| (av - lambda * v).pow2())
                .sum::<T>()
                .sqrt();
            if resid.as_f64() > tol * scale.as_f64() {
                converged = false;
            }
        }
        result.values = small.values[..k].to_vec();
        result.vectors = ritz[..k].to_vec();
        if converged || iter + 1 == max_iter {
            break;
        }
        basis = ritz_img;
        if orthonormalize(&mut basis) < p {
            for col in basis.iter_mut() {
                if norm(col) == T::zero() {
                    *col = (0..n).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect();
                }
            }
            orthonormalize(&mut basis);
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0f64];
        let e = jacobi_eigen(&a, 3);
        for (lambda, v) in e.values.iter().zip(&e.vectors) {
            for i in 0..3 {
                let av: f64 = (0..3).map(|j| a[i * 3 + j] * v[j]).sum();
                assert!((av - lambda * v[i]).abs() < 1e-10);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let trace: f64 = e.values.iter().sum();
        assert!((trace - 9.0).abs() < 1e-12);
    }

    #[test]
    fn subspace_iteration_matches_jacobi() {
        let n = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
        // A = B^T B is PSD
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum();
            }
        }
        let full = jacobi_eigen(&a, n);
        let top = top_eigen(
            n,
            3,
            |v: &[f64], out: &mut [f64]| {
                for i in 0..n {
                    out[i] = (0..n).map(|j| a[i * n + j] * v[j]).sum();
                }
            },
            500,
            1e-10,
            1,
        );
        for i in 0..3 {
            assert!((full.values[i] - top.values[i]).abs() / full.values[i] < 1e-8);
        }
    }

    #[test]
    fn gram_schmidt_orthonormal() {
        let mut cols = vec![vec![1.0, 1.0, 0.0f64], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 1.0]];
        let rank = orthonormalize(&mut cols);
        assert_eq!(rank, 2);
        assert!((dot(&cols[0], &cols[1])).abs() < 1e-12);
        assert!((norm(&cols[0]) - 1.0).abs() < 1e-12);
    }
}
