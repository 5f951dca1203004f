use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    Original,
    Rot90,
    Rot180,
    Rot270,
    /// Additive Gaussian noise, clamped to `[0, 1]`.
    Noise,
}

/// Quality-labelled patches; label 1 marks a single clean pit.
#[derive(Debug, Clone, Default)]
pub struct LabeledPatchSet {
    pub ids: Vec<String>,
    pub patches: Vec<GrayImage>,
    pub labels: Vec<u8>,
    pub augmentation: Vec<Augmentation>,
}

impl LabeledPatchSet {
    pub fn push(&mut self, id: impl Into<String>, patch: GrayImage, label: u8) {
        self.push_aug(id.into(), patch, label, Augmentation::Original);
    }

    fn push_aug(&mut self, id: String, patch: GrayImage, label: u8, aug: Augmentation) {
        self.ids.push(id);
        self.patches.push(patch);
        self.labels.push(label);
        self.augmentation.push(aug);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(class 0, class 1)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.len() - ones, ones)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.ids.len() != n || self.patches.len() != n || self.augmentation.len() != n {
            return Err(Error::InvalidInput("patch set columns differ in length".into()));
        }
        if let Some(i) = self.labels.iter().position(|&l| l > 1) {
            return Err(Error::InvalidInput(format!("label {} at {} is not 0 or 1", self.labels[i], self.ids[i])));
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledPatchSet {
        let mut out = LabeledPatchSet::default();
        for &i in idx {
            out.push_aug(self.ids[i].clone(), self.patches[i].clone(), self.labels[i], self.augmentation[i]);
        }
        out
    }

    /// Adds the three right-angle rotations of every original patch, then
    /// noisy copies of the minority class until both classes are equal.
    pub fn augmented(&self, rotations: bool, noise_sigma: f64, seed: u64) -> Result<LabeledPatchSet> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, noise_sigma.max(0.0))
            .map_err(|e| Error::Config(format!("noise sigma {noise_sigma}: {e}")))?;
        let mut out = self.clone();
        if rotations {
            for i in 0..self.len() {
                if self.augmentation[i] != Augmentation::Original {
                    continue;
                }
                for (k, aug) in [(1, Augmentation::Rot90), (2, Augmentation::Rot180), (3, Augmentation::Rot270)] {
                    out.push_aug(
                        format!("{}#rot{}", self.ids[i], 90 * k),
                        self.patches[i].rotate90_times(k),
                        self.labels[i],
                        aug,
                    );
                }
            }
        }
        let (c0, c1) = out.class_counts();
        if c0 == 0 || c1 == 0 {
            return Ok(out);
        }
        let minority = if c0 < c1 { 0 } else { 1 };
        let pool: Vec<usize> = (0..out.len()).filter(|&i| out.labels[i] == minority).collect();
        for k in 0..c0.abs_diff(c1) {
            let src = pool[k % pool.len()];
            let img = out.patches[src].map(|v| (v as f64 + noise.sample(&mut rng)).clamp(0.0, 1.0) as f32);
            let id = format!("{}#noise{k}", out.ids[src]);
            out.push_aug(id, img, minority, Augmentation::Noise);
        }
        Ok(out)
    }
}

/// Stratified `k`-fold split: each class is shuffled, the classes are
/// concatenated, and position `i` goes to fold `i mod k`, so fold sizes
/// differ by at most one and every fold sees both classes.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Precondition(format!("k-fold needs k >= 2 (got {k})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(labels.len());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::Precondition(format!(
                "class {class} has {} samples, fewer than k = {k}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        order.extend(idx);
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}
