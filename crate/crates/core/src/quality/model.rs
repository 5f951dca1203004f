use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::channels::{quality_features, FEATURE_LAYOUT, QUALITY_DIM};
use super::data::{stratified_folds, LabeledPatchSet};
use crate::error::{Error, Result};
use crate::raster::GrayImage;
use crate::scalar::Scalar;

const MODEL_VERSION: u32 = 1;

pub fn layout_hash() -> String {
    let digest = Sha256::digest(FEATURE_LAYOUT.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learning_rate: 0.5,
            epochs: 500,
            seed: 32,
        }
    }
}

/// Logistic regression on standardized pooled channel statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct QualityModel<T> {
    pub version: u32,
    pub layout_hash: String,
    pub weights: Vec<T>,
    pub bias: T,
    /// Per-feature centre and scale applied before the linear score.
    pub feature_mean: Vec<T>,
    pub feature_scale: Vec<T>,
    pub options: TrainOptions,
    /// Mean cross-entropy after each epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityPrediction {
    pub label: u8,
    pub probability: f64,
}

impl QualityPrediction {
    /// Probability exactly 0.5 keeps the patch.
    pub fn from_probability(p: f64) -> Self {
        QualityPrediction {
            label: (p >= 0.5) as u8,
            probability: p,
        }
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean binary cross-entropy of `sigmoid(w.x + b)` and its gradient in
/// `(w, b)`.
pub fn loss_and_grad<T: Scalar>(w: &[T], b: T, x: &[Vec<T>], y: &[u8]) -> (T, Vec<T>, T) {
    let n = T::from_usize_lossy(x.len().max(1));
    let mut loss = T::zero();
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = T::zero();
    for (row, &label) in x.iter().zip(y) {
        let z: T = row.iter().zip(w).map(|(&a, &c)| a * c).sum::<T>() + b;
        // -[y ln s + (1-y) ln(1-s)] = softplus(z) - y z
        let t = if label == 1 { T::one() } else { T::zero() };
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, &a) in gw.iter_mut().zip(row) {
            *g += r * a;
        }
        gb += r;
    }
    gw.iter_mut().for_each(|g| *g /= n);
    (loss / n, gw, gb / n)
}

impl<T: Scalar> QualityModel<T> {
    fn standardize(&self, features: &[f64]) -> Vec<T> {
        features
            .iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((&v, &m), &s)| (T::lit(v) - m) / s)
            .collect()
    }

    pub fn probability(&self, features: &[f64]) -> f64 {
        let x = self.standardize(features);
        let z: T = x.iter().zip(&self.weights).map(|(&a, &c)| a * c).sum::<T>() + self.bias;
        sigmoid(z).as_f64()
    }

    pub fn predict_features(&self, features: &[f64]) -> QualityPrediction {
        QualityPrediction::from_probability(self.probability(features))
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()>
    where
        T: Serialize,
    {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// Loads a model file, rejecting other versions or feature layouts.
    pub fn load(path: impl AsRef<Path>) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: QualityModel<T> = serde_json::from_str(&text).map_err(|e| Error::file(path, e))?;
        if model.version != MODEL_VERSION {
            return Err(Error::file(path, format!("model version {} (expected {MODEL_VERSION})", model.version)));
        }
        if model.layout_hash != layout_hash() {
            return Err(Error::file(path, "feature layout hash does not match this build"));
        }
        if model.weights.len() != QUALITY_DIM
            || model.feature_mean.len() != QUALITY_DIM
            || model.feature_scale.len() != QUALITY_DIM
        {
            return Err(Error::file(path, format!("expected {QUALITY_DIM} weights")));
        }
        Ok(model)
    }
}

/// Full-batch gradient descent from small seeded weights.
pub fn train_on_features<T: Scalar>(features: &[Vec<f64>], labels: &[u8], opts: &TrainOptions) -> Result<QualityModel<T>> {
    if features.len() != labels.len() {
        return Err(Error::InvalidInput("features and labels differ in length".into()));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::Training("both classes must be present".into()));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::InvalidInput("feature rows differ in length".into()));
    }
    if !(opts.learning_rate > 0.0) || opts.epochs == 0 {
        return Err(Error::Config("learning rate and epochs must be positive".into()));
    }
    let n = features.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| features.iter().map(|f| f[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..dim)
        .map(|j| {
            let var = features.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 1e-24 { var.sqrt() } else { 1.0 }
        })
        .collect();
    let x: Vec<Vec<T>> = features
        .iter()
        .map(|f| (0..dim).map(|j| T::lit((f[j] - mean[j]) / scale[j])).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init = Normal::new(0.0, 0.01).unwrap();
    let mut w: Vec<T> = (0..dim).map(|_| T::lit(init.sample(&mut rng))).collect();
    let mut b = T::zero();
    let lr = T::lit(opts.learning_rate);
    let mut history = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        let (_, gw, gb) = loss_and_grad(&w, b, &x, labels);
        for (wi, g) in w.iter_mut().zip(gw) {
            *wi -= lr * g;
        }
        b -= lr * gb;
        let (loss, _, _) = loss_and_grad(&w, b, &x, labels);
        if !loss.is_finite() {
            return Err(Error::Training("loss diverged".into()));
        }
        history.push(loss.as_f64());
    }
    Ok(QualityModel {
        version: MODEL_VERSION,
        layout_hash: layout_hash(),
        weights: w,
        bias: b,
        feature_mean: mean.into_iter().map(T::lit).collect(),
        feature_scale: scale.into_iter().map(T::lit).collect(),
        options: *opts,
        loss_history: history,
    })
}

fn featurize_all(data: &LabeledPatchSet) -> Vec<Vec<f64>> {
    data.patches.par_iter().map(quality_features).collect()
}

pub fn train_quality<T: Scalar>(data: &LabeledPatchSet, opts: &TrainOptions) -> Result<QualityModel<T>> {
    data.validate()?;
    train_on_features(&featurize_all(data), &data.labels, opts)
}

pub fn predict_quality<T: Scalar>(model: &QualityModel<T>, patch: &GrayImage) -> QualityPrediction {
    model.predict_features(&quality_features(patch))
}

/// Reads `patch_id,probability` rows (header optional).
pub fn read_scores(path: impl AsRef<Path>) -> Result<HashMap<String, f64>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::file(path, e))?;
    let mut out = HashMap::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::file(path, e))?;
        if rec.len() < 2 {
            return Err(Error::file(path, format!("line {}: expected patch_id,probability", line + 1)));
        }
        let p: f64 = match rec[1].parse() {
            Ok(p) => p,
            Err(_) if line == 0 => continue,
            Err(_) => return Err(Error::file(path, format!("line {}: bad probability {:?}", line + 1, &rec[1]))),
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::file(path, format!("line {}: probability {p} outside [0, 1]", line + 1)));
        }
        out.insert(rec[0].to_string(), p);
    }
    Ok(out)
}

/// An external score for `id` takes precedence over the model.
pub fn predict_with_scores<T: Scalar>(
    model: Option<&QualityModel<T>>,
    scores: &HashMap<String, f64>,
    id: &str,
    patch: &GrayImage,
) -> Option<QualityPrediction> {
    match scores.get(id) {
        Some(&p) => Some(QualityPrediction::from_probability(p)),
        None => model.map(|m| predict_quality(m, patch)),
    }
}

/// Per-fold accuracy of models trained on the other folds. Features are
/// computed once; augmented copies of a held-out patch never reach its
/// training folds because folds are drawn over the given set as is.
pub fn crossval<T: Scalar>(data: &LabeledPatchSet, k: usize, seed: u64, opts: &TrainOptions) -> Result<Vec<f64>> {
    data.validate()?;
    if data.len() < k {
        return Err(Error::Precondition(format!("{} patches for {k} folds", data.len())));
    }
    let feats = featurize_all(data);
    let folds = stratified_folds(&data.labels, k, seed)?;
    folds
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let train: Vec<usize> = folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, v)| v).copied().collect();
            let x: Vec<Vec<f64>> = train.iter().map(|&i| feats[i].clone()).collect();
            let y: Vec<u8> = train.iter().map(|&i| data.labels[i]).collect();
            let model = train_on_features::<T>(&x, &y, opts)?;
            let correct = test
                .iter()
                .filter(|&&i| model.predict_features(&feats[i]).label == data.labels[i])
                .count();
            Ok(correct as f64 / test.len() as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn center_fixture(n: usize, seed: u64) -> LabeledPatchSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = LabeledPatchSet::default();
        for i in 0..2 * n {
            let label = (i % 2) as u8;
            let centre = if label == 1 { 0.8 } else { 0.2 };
            let jitter: f32 = rng.random_range(-0.05..0.05);
            let img = GrayImage::from_fn(48, 48, |x, y| {
                let r2 = (x as f32 - 24.0).powi(2) + (y as f32 - 24.0).powi(2);
                let v = if r2 < 100.0 { centre } else { 0.5 };
                (v + jitter + rng.random_range(-0.03f32..0.03)).clamp(0.0, 1.0)
            });
            s.push(format!("c{i}"), img, label);
        }
        s
    }

    #[test]
    fn separable_fixture_fits() {
        let data = center_fixture(100, 1);
        let model: QualityModel<f64> = train_quality(&data, &TrainOptions { epochs: 200, ..Default::default() }).unwrap();
        let acc = data
            .patches
            .iter()
            .zip(&data.labels)
            .filter(|(p, &l)| predict_quality(&model, p).label == l)
            .count();
        assert_eq!(acc, 200);
        let folds = crossval::<f64>(&data, 5, 3, &TrainOptions { epochs: 100, ..Default::default() }).unwrap();
        assert!(folds.iter().all(|&a| a == 1.0), "{folds:?}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec<f64>> = (0..40).map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<u8> = (0..40).map(|i| (i % 3 == 0) as u8).collect();
        for _ in 0..5 {
            let w: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = rng.random_range(-1.0..1.0);
            let (_, gw, gb) = loss_and_grad(&w, b, &x, &y);
            let h = 1e-6;
            for j in 0..=6 {
                let bump = |s: f64| {
                    let mut w2 = w.clone();
                    let mut b2 = b;
                    if j < 6 { w2[j] += s } else { b2 += s }
                    loss_and_grad(&w2, b2, &x, &y).0
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let an = if j < 6 { gw[j] } else { gb };
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{j}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn small_step_loss_non_increasing() {
        let data = center_fixture(30, 2);
        let m: QualityModel<f64> =
            train_quality(&data, &TrainOptions { learning_rate: 0.01, epochs: 100, seed: 4 }).unwrap();
        for w in m.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn single_class_rejected() {
        let mut data = center_fixture(5, 3);
        data.labels.iter_mut().for_each(|l| *l = 1);
        assert!(matches!(train_quality::<f64>(&data, &TrainOptions::default()), Err(Error::Training(_))));
    }

    #[test]
    fn half_probability_keeps() {
        assert_eq!(QualityPrediction::from_probability(0.5).label, 1);
        assert_eq!(QualityPrediction::from_probability(0.4999).label, 0);
    }

    #[test]
    fn scores_override_model() {
        let data = center_fixture(10, 5);
        let model: QualityModel<f32> = train_quality(&data, &TrainOptions { epochs: 50, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        std::fs::write(&path, "patch_id,probability\nc1,0.1\n").unwrap();
        let scores = read_scores(&path).unwrap();
        assert_eq!(predict_quality(&model, &data.patches[1]).label, 1);
        assert_eq!(predict_with_scores(Some(&model), &scores, "c1", &data.patches[1]).unwrap().label, 0);
        assert_eq!(predict_with_scores(Some(&model), &scores, "c3", &data.patches[3]).unwrap().label, 1);
        assert!(predict_with_scores::<f32>(None, &scores, "c3", &data.patches[3]).is_none());
    }

    #[test]
    fn model_round_trip_and_layout_check() {
        let data = center_fixture(10, 6);
        let model: QualityModel<f64> = train_quality(&data, &TrainOptions { epochs: 20, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.save(&path).unwrap();
        assert_eq!(QualityModel::<f64>::load(&path).unwrap(), model);
        let mut bad = model.clone();
        bad.layout_hash = "00".into();
        bad.save(&path).unwrap();
        assert!(QualityModel::<f64>::load(&path).is_err());
    }

    #[test]
    fn shuffled_labels_near_chance() {
        let data = center_fixture(60, 7);
        let mut total = 0.0;
        for seed in 0..10 {
            let mut shuffled = data.clone();
            use rand::seq::SliceRandom;
            shuffled.labels.shuffle(&mut ChaCha8Rng::seed_from_u64(100 + seed));
            let accs = crossval::<f64>(&shuffled, 5, seed, &TrainOptions { epochs: 100, ..Default::default() }).unwrap();
            total += accs.iter().sum::<f64>() / accs.len() as f64;
        }
        let mean = total / 10.0;
        assert!((mean - 0.5).abs() <= 0.05, "{mean}");
    }
}
