//! Exact t-distributed stochastic neighbour embedding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{validate_rows, Embedding, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Scalar};

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 50;
const CHECK_EVERY: usize = 10;
const KL_SLACK: f64 = 1e-6;

/// Objective values at the accepted checkpoints after early exaggeration.
#[derive(Debug, Clone, Default)]
pub struct TsneTrace {
    pub kl: Vec<(usize, f64)>,
    pub learning_rate: f64,
    /// Chunks that raised the objective and were rolled back.
    pub rollbacks: usize,
}

/// Row-conditional Gaussian affinities whose entropy equals `ln(perplexity)`.
pub fn conditional_affinities(d2: &[Vec<f64>], perplexity: f64) -> Vec<Vec<f64>> {
    let target = perplexity.ln();
    d2.iter()
        .enumerate()
        .map(|(i, row)| {
            let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
            let mut p = vec![0.0; row.len()];
            for _ in 0..200 {
                let min_d = row
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &d)| d)
                    .fold(f64::INFINITY, f64::min);
                let mut sum = 0.0;
                for (j, &d) in row.iter().enumerate() {
                    p[j] = if j == i { 0.0 } else { (-(d - min_d) * beta).exp() };
                    sum += p[j];
                }
                let mut weighted = 0.0;
                for (j, &d) in row.iter().enumerate() {
                    p[j] /= sum;
                    weighted += p[j] * (d - min_d);
                }
                let entropy = sum.ln() + beta * weighted;
                let diff = entropy - target;
                if diff.abs() < 1e-5 {
                    break;
                }
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_infinite() { beta * 2.0 } else { (beta + hi) / 2.0 };
                } else {
                    hi = beta;
                    beta = if lo.is_infinite() { beta / 2.0 } else { (beta + lo) / 2.0 };
                }
            }
            p
        })
        .collect()
}

fn kl_and_grad(p: &[f64], y: &[Vec<f64>], exaggeration: f64, grad: Option<&mut [Vec<f64>]>) -> f64 {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let v = 1.0 / (1.0 + sq_dist(&y[i], &y[j]));
            num[i * n + j] = v;
            num[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[i * n + j];
                let qij = (num[i * n + j] / z).max(1e-12);
                kl += pij * (pij / qij).ln();
            }
        }
    }
    if let Some(g) = grad {
        for i in 0..n {
            g[i].iter_mut().for_each(|v| *v = 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let nij = num[i * n + j];
                let m = 4.0 * (exaggeration * p[i * n + j] - nij / z) * nij;
                for (d, gv) in g[i].iter_mut().enumerate() {
                    *gv += m * (y[i][d] - y[j][d]);
                }
            }
        }
    }
    kl
}

#[derive(Clone)]
struct State {
    y: Vec<Vec<f64>>,
    update: Vec<Vec<f64>>,
    gains: Vec<Vec<f64>>,
}

fn step(state: &mut State, p: &[f64], exaggeration: f64, momentum: f64, lr: f64, grad: &mut [Vec<f64>]) {
    kl_and_grad(p, &state.y, exaggeration, Some(grad));
    for i in 0..state.y.len() {
        for d in 0..state.y[i].len() {
            let g = grad[i][d];
            let u = &mut state.update[i][d];
            let gain = &mut state.gains[i][d];
            *gain = if (g > 0.0) != (*u > 0.0) { *gain + 0.2 } else { *gain * 0.8 }.max(0.01);
            *u = momentum * *u - lr * *gain * g;
            state.y[i][d] += *u;
        }
    }
}

/// Embeds with early exaggeration 12 for the first 50 iterations. After that
/// the objective is evaluated every 10 iterations; a chunk that raises it is
/// rolled back and retried at half the learning rate.
pub fn reduce_tsne<T: Scalar>(rows: &[Vec<T>], config: &EmbeddingConfig) -> Result<(Embedding<T>, TsneTrace)> {
    validate_rows(rows)?;
    let n = rows.len();
    let dim = config.n_components;
    if !(config.perplexity > 0.0) || 3.0 * config.perplexity >= n as f64 {
        return Err(Error::Precondition(format!(
            "perplexity {} needs more than {} points (have {n})",
            config.perplexity,
            3.0 * config.perplexity
        )));
    }
    if dim == 0 {
        return Err(Error::Precondition("n_components must be at least 1".into()));
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
    let d2: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| sq_dist(a, b)).collect()).collect();
    let cond = conditional_affinities(&d2, config.perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(1e-12);
        }
        p[i * n + i] = 0.0;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 1e-4).unwrap();
    let mut state = State {
        y: (0..n).map(|_| (0..dim).map(|_| init.sample(&mut rng)).collect()).collect(),
        update: vec![vec![0.0; dim]; n],
        gains: vec![vec![1.0; dim]; n],
    };
    let mut grad = vec![vec![0.0; dim]; n];
    let mut lr = (n as f64 / EXAGGERATION / 4.0).max(50.0);
    let total = config.tsne_iterations.max(EXAGGERATION_ITERS);
    let momentum = |it: usize| if it < 250 { 0.5 } else { 0.8 };

    for it in 0..EXAGGERATION_ITERS {
        step(&mut state, &p, EXAGGERATION, momentum(it), lr, &mut grad);
    }
    let mut trace = TsneTrace::default();
    let mut it = EXAGGERATION_ITERS;
    let mut kl = kl_and_grad(&p, &state.y, 1.0, None);
    trace.kl.push((it, kl));
    while it < total && lr > 1e-8 {
        let chunk = CHECK_EVERY.min(total - it);
        let saved = state.clone();
        for k in 0..chunk {
            step(&mut state, &p, 1.0, momentum(it + k), lr, &mut grad);
        }
        let next = kl_and_grad(&p, &state.y, 1.0, None);
        if next.is_finite() && next <= kl + KL_SLACK {
            it += chunk;
            kl = next;
            trace.kl.push((it, kl));
        } else {
            state = saved;
            lr /= 2.0;
            trace.rollbacks += 1;
        }
    }
    trace.learning_rate = lr;
    let coords = state.y.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect();
    let mut e = Embedding::new(coords, dim);
    if trace.rollbacks > 0 {
        e.warnings.push(format!("{} optimization chunks rolled back", trace.rollbacks));
    }
    Ok((e, trace))
}
