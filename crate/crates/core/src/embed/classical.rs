//! Hand-crafted patch descriptors, used when no external vectors are supplied.

use serde::{Deserialize, Serialize};

use super::{FeatureSource, FeatureVector};
use crate::error::{Error, Result};
use crate::imgproc::{descriptors, fit_ellipse, Blob, Patch};
use crate::raster::{BinaryMask, GrayImage};
use crate::scalar::Scalar;

pub const PATCH_SIDE: usize = 64;
const RADIAL_BINS: usize = 16;
const HIST_BINS: usize = 16;
/// 7 Hu moments, 16 radial bins, 16 histogram bins, 4 shape descriptors.
pub const CLASSICAL_DIM: usize = 7 + RADIAL_BINS + HIST_BINS + 4;

/// Unnormalized descriptor of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalRaw {
    pub values: Vec<f64>,
    /// Binarization found no foreground; the Hu block is zero.
    pub empty_binary: bool,
}

/// Otsu's threshold on a 256-bin histogram, or `None` for a flat image.
pub fn otsu_threshold(img: &GrayImage) -> Option<f32> {
    let (lo, hi) = img
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 0.02 {
        return None;
    }
    let mut hist = [0usize; 256];
    for &v in img.data() {
        hist[((v * 255.0).round() as usize).min(255)] += 1;
    }
    let total = img.data().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_t) = (-1.0, 0usize);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1).powi(2);
        if between > best {
            best = between;
            best_t = t;
        }
    }
    Some((best_t as f32 + 0.5) / 255.0)
}

/// The seven Hu invariants of a binary shape, or `None` when it is empty.
pub fn hu_moments(mask: &BinaryMask) -> Option<[f64; 7]> {
    let pts = mask.points();
    if pts.is_empty() {
        return None;
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let mu = |p: i32, q: i32| -> f64 {
        pts.iter()
            .map(|&(x, y)| (x as f64 - cx).powi(p) * (y as f64 - cy).powi(q))
            .sum()
    };
    let eta = |p: i32, q: i32| mu(p, q) / n.powf(1.0 + (p + q) as f64 / 2.0);
    let (n20, n02, n11) = (eta(2, 0), eta(0, 2), eta(1, 1));
    let (n30, n03, n21, n12) = (eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2));
    let a = n30 + n12;
    let b = n21 + n03;
    Some([
        n20 + n02,
        (n20 - n02).powi(2) + 4.0 * n11 * n11,
        (n30 - 3.0 * n12).powi(2) + (3.0 * n21 - n03).powi(2),
        a * a + b * b,
        (n30 - 3.0 * n12) * a * (a * a - 3.0 * b * b) + (3.0 * n21 - n03) * b * (3.0 * a * a - b * b),
        (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b,
        (3.0 * n21 - n03) * a * (a * a - 3.0 * b * b) - (n30 - 3.0 * n12) * b * (3.0 * a * a - b * b),
    ])
}

/// Descriptor of one patch, before dataset normalization.
///
/// Hu moments and the radial profile come from the 64x64 resample, binarized
/// with Otsu (dark = foreground); the shape block from the patch's own blob
/// mask at native resolution.
/// Linear stretch to the full [0, 1] range; constant images are left alone.
fn stretched(img: &GrayImage) -> GrayImage {
    let (lo, hi) = img
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi > lo {
        img.map(|v| (v - lo) / (hi - lo))
    } else {
        img.clone()
    }
}

/// Intensity blocks are computed after a per-patch min-max stretch, so
/// illumination offset and gain do not reach the descriptor.
pub fn classical_features_raw(patch: &Patch) -> ClassicalRaw {
    let img = stretched(&patch.image.resize_bilinear(PATCH_SIDE, PATCH_SIDE));
    let bin = match otsu_threshold(&img) {
        Some(t) => BinaryMask::from_fn(PATCH_SIDE, PATCH_SIDE, |x, y| img.get(x, y) < t),
        None => BinaryMask::new(PATCH_SIDE, PATCH_SIDE),
    };
    let hu = hu_moments(&bin);
    let empty_binary = hu.is_none();
    let mut values = Vec::with_capacity(CLASSICAL_DIM);
    values.extend_from_slice(&hu.unwrap_or([0.0; 7]));

    let pts = bin.points();
    let (cx, cy) = if pts.is_empty() {
        ((PATCH_SIDE - 1) as f64 / 2.0, (PATCH_SIDE - 1) as f64 / 2.0)
    } else {
        let n = pts.len() as f64;
        (
            pts.iter().map(|p| p.0 as f64).sum::<f64>() / n,
            pts.iter().map(|p| p.1 as f64).sum::<f64>() / n,
        )
    };
    let bin_width = PATCH_SIDE as f64 / 2.0 / RADIAL_BINS as f64;
    let mut sums = [0.0; RADIAL_BINS];
    let mut counts = [0usize; RADIAL_BINS];
    for y in 0..PATCH_SIDE {
        for x in 0..PATCH_SIDE {
            let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let b = (r / bin_width) as usize;
            if b < RADIAL_BINS {
                sums[b] += img.get(x, y) as f64;
                counts[b] += 1;
            }
        }
    }
    let mut last = img.mean();
    for b in 0..RADIAL_BINS {
        if counts[b] > 0 {
            last = sums[b] / counts[b] as f64;
        }
        values.push(last);
    }

    let mut hist = [0.0; HIST_BINS];
    for &v in img.data() {
        hist[((v * HIST_BINS as f32) as usize).min(HIST_BINS - 1)] += 1.0;
    }
    let total = img.data().len() as f64;
    values.extend(hist.iter().map(|c| c / total));

    let shape = Blob::from_mask(&patch.mask)
        .and_then(|b| fit_ellipse(&b).ok().map(|f| descriptors(&b, &f)));
    match shape {
        Some(d) => values.extend([d.area as f64, d.lengthiness, d.compactness, d.circularity]),
        None => values.extend([0.0; 4]),
    }
    debug_assert_eq!(values.len(), CLASSICAL_DIM);
    ClassicalRaw { values, empty_binary }
}

/// Per-dimension min-max normalization fitted on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::InvalidInput("cannot fit a scaler on zero rows".into()))?;
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for r in rows {
            for (j, &v) in r.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(MinMaxScaler { min, max })
    }

    /// Constant dimensions map to 0. Values outside the fitted range are not clamped.
    pub fn transform<T: Scalar>(&self, row: &[f64]) -> Vec<T> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.max[j] - self.min[j];
                T::lit(if span > 0.0 { (v - self.min[j]) / span } else { 0.0 })
            })
            .collect()
    }
}

/// Normalized classical vectors for a dataset plus the fitted scaler.
pub fn classical_features<T: Scalar>(
    ids: &[String],
    raw: &[ClassicalRaw],
) -> Result<(Vec<FeatureVector<T>>, MinMaxScaler)> {
    if ids.len() != raw.len() {
        return Err(Error::InvalidInput(format!(
            "{} ids for {} descriptors",
            ids.len(),
            raw.len()
        )));
    }
    let rows: Vec<Vec<f64>> = raw.iter().map(|r| r.values.clone()).collect();
    let scaler = MinMaxScaler::fit(&rows)?;
    let out = ids
        .iter()
        .zip(&rows)
        .map(|(id, r)| FeatureVector {
            id: id.clone(),
            values: scaler.transform(r),
            source: FeatureSource::Classical,
        })
        .collect();
    Ok((out, scaler))
}
