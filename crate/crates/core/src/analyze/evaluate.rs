use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::detect::Detection;
use crate::defect::{DislocationType, PerType};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Root-mean-square difference between per-image true and predicted counts.
pub fn rmse<T: Scalar>(truth: &[T], predicted: &[T]) -> Result<T> {
    if truth.len() != predicted.len() {
        return Err(Error::InvalidInput(format!(
            "{} truth values but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("rmse needs at least one value".into()));
    }
    let sum: T = truth.iter().zip(predicted).map(|(&a, &b)| (a - b).pow2()).sum();
    Ok((sum / T::from_usize_lossy(truth.len())).sqrt())
}

pub type Counts = BTreeMap<String, PerType<usize>>;

pub fn count_by_tile(detections: &[Detection]) -> Counts {
    let mut out = Counts::new();
    for d in detections {
        *out.entry(d.tile_id.clone()).or_default().get_mut(d.dtype) += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub dataset: String,
    pub rmse: PerType<f64>,
    /// Images scored, in order.
    pub images: Vec<String>,
    pub truth: PerType<Vec<usize>>,
    pub predicted: PerType<Vec<usize>>,
    /// Predicted minus true count, per image.
    pub errors: PerType<Vec<i64>>,
    /// Images that had predictions but no ground truth.
    pub excluded: Vec<String>,
}

impl RmseReport {
    /// Occurrences of each signed error value.
    pub fn histogram(&self, t: DislocationType) -> BTreeMap<i64, usize> {
        let mut h = BTreeMap::new();
        for &e in self.errors.get(t) {
            *h.entry(e).or_default() += 1;
        }
        h
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// One row per image and type: `image,type,truth,predicted,error`.
    pub fn save_errors_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::file(path, e))?;
        w.write_record(["image", "type", "truth", "predicted", "error"]).map_err(|e| Error::file(path, e))?;
        for (i, img) in self.images.iter().enumerate() {
            for t in DislocationType::ALL {
                w.write_record([
                    img.clone(),
                    t.name().to_string(),
                    self.truth.get(t)[i].to_string(),
                    self.predicted.get(t)[i].to_string(),
                    self.errors.get(t)[i].to_string(),
                ])
                .map_err(|e| Error::file(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Scores every image with ground truth; images without predictions count
/// as zero detections.
pub fn evaluate(dataset: &str, truth: &Counts, predicted: &Counts) -> Result<RmseReport> {
    if truth.is_empty() {
        return Err(Error::InvalidInput("no images with ground truth".into()));
    }
    let images: Vec<String> = truth.keys().cloned().collect();
    let excluded: Vec<String> = predicted.keys().filter(|k| !truth.contains_key(*k)).cloned().collect();
    let zero = PerType::default();
    let col = |m: &Counts, t: DislocationType| -> Vec<usize> {
        images.iter().map(|i| *m.get(i).unwrap_or(&zero).get(t)).collect()
    };
    let truth_cols = PerType::from_fn(|t| col(truth, t));
    let pred_cols = PerType::from_fn(|t| col(predicted, t));
    let errors = PerType::from_fn(|t| {
        truth_cols
            .get(t)
            .iter()
            .zip(pred_cols.get(t))
            .map(|(&a, &b)| b as i64 - a as i64)
            .collect::<Vec<i64>>()
    });
    let mut rmse_t = PerType::default();
    for t in DislocationType::ALL {
        let a: Vec<f64> = truth_cols.get(t).iter().map(|&v| v as f64).collect();
        let b: Vec<f64> = pred_cols.get(t).iter().map(|&v| v as f64).collect();
        *rmse_t.get_mut(t) = rmse(&a, &b)?;
    }
    Ok(RmseReport {
        dataset: dataset.to_string(),
        rmse: rmse_t,
        images,
        truth: truth_cols,
        predicted: pred_cols,
        errors,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stated_cases() {
        assert_eq!(rmse(&[4.0, 7.0, 9.0], &[4.0, 7.0, 9.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - (12.5f64).sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&[10.0], &[7.0]).unwrap(), 3.0);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn constant_offset_gives_offset() {
        let truth: Counts = (0..5).map(|i| (format!("i{i}"), PerType { bpd: i, ted: 2 * i, tsd: 1 })).collect();
        let pred: Counts = truth
            .iter()
            .map(|(k, v)| (k.clone(), PerType { bpd: v.bpd + 1, ..*v }))
            .chain([("extra".to_string(), PerType::default())])
            .collect();
        let r = evaluate("d", &truth, &pred).unwrap();
        assert_eq!(r.rmse, PerType { bpd: 1.0, ted: 0.0, tsd: 0.0 });
        assert_eq!(r.excluded, vec!["extra".to_string()]);
        assert_eq!(r.histogram(DislocationType::Bpd), BTreeMap::from([(1, 5)]));
    }

    proptest! {
        #[test]
        fn rmse_properties(v in proptest::collection::vec(-1e3f64..1e3, 1..50), w in proptest::collection::vec(-1e3f64..1e3, 50), c in -100f64..100.0) {
            let w = &w[..v.len()];
            let e = rmse(&v, w).unwrap();
            prop_assert!(e >= 0.0);
            prop_assert!((e - rmse(w, &v).unwrap()).abs() <= 1e-9 * (1.0 + e));
            prop_assert_eq!(rmse(&v, &v).unwrap(), 0.0);
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            prop_assert!((rmse(&v, &shifted).unwrap() - c.abs()).abs() <= 1e-9 * (1.0 + c.abs()));
        }
    }
}
