use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defect::DislocationType;
use crate::dictionary::Dictionary;
use crate::embed::umap::{fit_umap, UmapModel};
use crate::embed::{classical_features_raw, EmbeddingConfig, MinMaxScaler};
use crate::error::{Error, Result};
use crate::imgproc::{extract_patch, find_candidates, BBox, GateVerdict, ImgprocParams};
use crate::quality::{predict_quality, QualityModel};
use crate::raster::{GrayImage, LocalMask};
use crate::scalar::{sq_dist, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionSource {
    Builtin,
    External,
}

/// One classified pit in tile coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub tile_id: String,
    #[serde(rename = "type")]
    pub dtype: DislocationType,
    pub bbox: BBox,
    pub mask: LocalMask,
    /// Mask centroid in tile pixels.
    pub center: (f64, f64),
    pub score: f64,
    pub source: DetectionSource,
}

impl Detection {
    pub fn area(&self) -> usize {
        self.mask.area()
    }

    /// `sqrt(area / pi)` in pixels.
    pub fn radius_px(&self) -> f64 {
        (self.area() as f64 / std::f64::consts::PI).sqrt()
    }
}

/// Candidates that did not become detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unclassified {
    pub bbox: BBox,
    pub area: usize,
    pub verdict: GateVerdict,
    /// Quality probability when the gate rejected the patch.
    pub quality: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TileDetections {
    pub detections: Vec<Detection>,
    pub unclassified: Vec<Unclassified>,
}

/// Everything the built-in detector needs: segmentation settings, the
/// feature scaler and embedding fitted on the dictionary, per-type centroids
/// in embedding space and an optional quality gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct DetectorModel<T> {
    pub imgproc: ImgprocParams,
    pub scaler: MinMaxScaler,
    pub embedding: UmapModel<T>,
    pub centroids: Vec<(DislocationType, Vec<T>)>,
    pub quality: Option<QualityModel<T>>,
}

impl<T: Scalar> DetectorModel<T> {
    /// Embeds the dictionary and takes each type's mean embedded position as
    /// its centroid.
    pub fn from_dictionary(dict: &Dictionary, imgproc: ImgprocParams, config: &EmbeddingConfig) -> Result<Self> {
        if dict.is_empty() {
            return Err(Error::Config("dictionary is empty".into()));
        }
        let raw: Vec<Vec<f64>> = dict
            .entries
            .par_iter()
            .map(|e| classical_features_raw(&e.as_patch()).values)
            .collect();
        let scaler = MinMaxScaler::fit(&raw)?;
        let rows: Vec<Vec<T>> = raw.iter().map(|r| scaler.transform(r)).collect();
        let (emb, model) = fit_umap(&rows, config)?;
        let mut centroids = Vec::new();
        for t in DislocationType::ALL {
            let idx: Vec<usize> = (0..dict.len()).filter(|&i| dict.entries[i].dtype == t).collect();
            if idx.is_empty() {
                continue;
            }
            let k = T::from_usize_lossy(idx.len());
            let c = (0..emb.n_components)
                .map(|d| idx.iter().map(|&i| emb.coords[i][d]).sum::<T>() / k)
                .collect();
            centroids.push((t, c));
        }
        Ok(DetectorModel {
            imgproc,
            scaler,
            embedding: model,
            centroids,
            quality: None,
        })
    }

    pub fn with_quality(mut self, gate: Option<QualityModel<T>>) -> Self {
        self.quality = gate;
        self
    }

    /// Nearest centroid and its distance for an embedded point.
    pub fn classify(&self, point: &[T]) -> (DislocationType, f64) {
        self.centroids
            .iter()
            .map(|(t, c)| (*t, sq_dist(point, c).as_f64().sqrt()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("model has centroids")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()>
    where
        T: Serialize,
    {
        let path = path.as_ref();
        let json = serde_json::to_string(self).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::file(path, e))?;
        if m.centroids.is_empty() {
            return Err(Error::file(path, "detector model has no centroids"));
        }
        Ok(m)
    }
}

/// Contrast correction, segmentation and shape gate; kept candidates are cut
/// from the original tile, quality-gated, embedded and given the type of the
/// nearest centroid with score `1 / (1 + distance)`.
pub fn detect_tile<T: Scalar>(tile_id: &str, img: &GrayImage, model: &DetectorModel<T>) -> Result<TileDetections> {
    if model.centroids.is_empty() {
        return Err(Error::Config("detector model has no centroids; build the dictionary first".into()));
    }
    let (_, candidates) = find_candidates(img, &model.imgproc)?;
    let mut out = TileDetections::default();
    for cand in candidates {
        if !cand.verdict.is_keep() {
            out.unclassified.push(Unclassified {
                bbox: cand.blob.bbox,
                area: cand.blob.area,
                verdict: cand.verdict,
                quality: None,
            });
            continue;
        }
        let patch = extract_patch(img, &cand.blob, model.imgproc.border);
        if let Some(gate) = &model.quality {
            let q = predict_quality(gate, &patch.image);
            if q.label == 0 {
                out.unclassified.push(Unclassified {
                    bbox: cand.blob.bbox,
                    area: cand.blob.area,
                    verdict: cand.verdict,
                    quality: Some(q.probability),
                });
                continue;
            }
        }
        let raw = classical_features_raw(&patch);
        let x: Vec<T> = model.scaler.transform(&raw.values);
        let y = model.embedding.transform(&x);
        let (dtype, d) = model.classify(&y);
        let b = cand.blob.bbox;
        let mut mask = LocalMask::rect(b.x0, b.y0, b.width(), b.height());
        mask.bits.iter_mut().for_each(|v| *v = false);
        for &(px, py) in &cand.blob.pixels {
            mask.bits[(py as usize - b.y0) * b.width() + (px as usize - b.x0)] = true;
        }
        out.detections.push(Detection {
            tile_id: tile_id.to_string(),
            dtype,
            bbox: b,
            mask,
            center: cand.blob.centroid,
            score: 1.0 / (1.0 + d),
            source: DetectionSource::Builtin,
        });
    }
    Ok(out)
}
