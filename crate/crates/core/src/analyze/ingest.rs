use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::detect::{Detection, DetectionSource};
use super::manifest::TileManifest;
use crate::defect::DislocationType;
use crate::error::{Error, Result};
use crate::imgproc::BBox;
use crate::raster::{BinaryMask, LocalMask};
use crate::synth::{decode_rle, rasterize_polygons, CocoAnnotation, CocoImage, Segmentation};

/// Image a prediction record may refer to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub image_id: u64,
    pub tile_id: String,
    pub width: usize,
    pub height: usize,
}

pub fn frames_from_manifest(m: &TileManifest) -> Vec<Frame> {
    m.tiles
        .iter()
        .enumerate()
        .map(|(i, t)| Frame {
            image_id: m.image_id(i),
            tile_id: t.tile_id.clone(),
            width: t.width,
            height: t.height,
        })
        .collect()
}

/// Tile id of a COCO image: its file name without directory or extension.
pub fn coco_tile_id(file_name: &str) -> String {
    Path::new(file_name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| file_name.to_string())
}

pub fn frames_from_coco(images: &[CocoImage]) -> Vec<Frame> {
    images
        .iter()
        .map(|im| Frame {
            image_id: im.id,
            tile_id: coco_tile_id(&im.file_name),
            width: im.width,
            height: im.height,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IngestReject {
    UnknownImage,
    UnknownCategory,
    OutOfBounds,
    BadMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// Position of the record in the input.
    pub index: usize,
    pub reason: IngestReject,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub detections: Vec<Detection>,
    pub rejections: Vec<Rejection>,
    /// Records dropped because an identical box and category was already seen
    /// on the same image.
    pub duplicates: usize,
}

fn mask_of(ann: &CocoAnnotation, frame: &Frame) -> std::result::Result<Option<BinaryMask>, String> {
    match &ann.segmentation {
        None => Ok(None),
        Some(Segmentation::Rle(rle)) => {
            if rle.size != [frame.height, frame.width] {
                return Err(format!("mask size {:?} differs from image {}x{}", rle.size, frame.width, frame.height));
            }
            decode_rle(rle).map(Some).map_err(|e| e.to_string())
        }
        Some(Segmentation::Polygons(p)) => Ok(Some(rasterize_polygons(p, frame.width, frame.height))),
    }
}

fn local_from_full(mask: &BinaryMask) -> Option<(LocalMask, BBox)> {
    let (x0, y0, x1, y1) = mask.bbox()?;
    let sub = BinaryMask::from_fn(x1 - x0 + 1, y1 - y0 + 1, |x, y| mask.get(x + x0, y + y0));
    Some((LocalMask::from_mask(x0, y0, &sub), BBox { x0, y0, x1, y1 }))
}

/// Validates records against their frames and converts them to detections.
/// Records without a mask get their box as mask.
pub fn ingest_annotations(records: &[CocoAnnotation], frames: &[Frame], source: DetectionSource) -> IngestReport {
    let mut report = IngestReport::default();
    let mut seen: HashSet<(u64, u32, [u64; 4])> = HashSet::new();
    for (index, ann) in records.iter().enumerate() {
        let reject = |reason, detail: String| Rejection { index, reason, detail };
        let Some(frame) = frames.iter().find(|f| f.image_id == ann.image_id) else {
            report.rejections.push(reject(IngestReject::UnknownImage, format!("image id {}", ann.image_id)));
            continue;
        };
        let Some(dtype) = DislocationType::from_category_id(ann.category_id) else {
            report.rejections.push(reject(IngestReject::UnknownCategory, format!("category id {}", ann.category_id)));
            continue;
        };
        let [bx, by, bw, bh] = ann.bbox;
        let eps = 1e-6;
        if !(bx >= -eps && by >= -eps && bw > 0.0 && bh > 0.0)
            || bx + bw > frame.width as f64 + eps
            || by + bh > frame.height as f64 + eps
        {
            report.rejections.push(reject(
                IngestReject::OutOfBounds,
                format!("box {:?} outside {}x{}", ann.bbox, frame.width, frame.height),
            ));
            continue;
        }
        let key = (ann.image_id, ann.category_id, ann.bbox.map(f64::to_bits));
        if !seen.insert(key) {
            report.duplicates += 1;
            continue;
        }
        let (mask, bbox) = match mask_of(ann, frame) {
            Err(e) => {
                report.rejections.push(reject(IngestReject::BadMask, e));
                continue;
            }
            Ok(Some(m)) => match local_from_full(&m) {
                Some(v) => v,
                None => {
                    report.rejections.push(reject(IngestReject::BadMask, "empty mask".into()));
                    continue;
                }
            },
            Ok(None) => {
                let x0 = bx.floor().max(0.0) as usize;
                let y0 = by.floor().max(0.0) as usize;
                let x1 = ((bx + bw).ceil() as usize).clamp(x0 + 1, frame.width) - 1;
                let y1 = ((by + bh).ceil() as usize).clamp(y0 + 1, frame.height) - 1;
                (LocalMask::rect(x0, y0, x1 - x0 + 1, y1 - y0 + 1), BBox { x0, y0, x1, y1 })
            }
        };
        let center = mask.centroid().expect("nonempty mask");
        report.detections.push(Detection {
            tile_id: frame.tile_id.clone(),
            dtype,
            bbox,
            mask,
            center,
            score: ann.score.unwrap_or(1.0).clamp(0.0, 1.0),
            source,
        });
    }
    if report.duplicates > 0 {
        log::warn!("{} duplicate prediction records dropped", report.duplicates);
    }
    report
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ResultsFile {
    List(Vec<CocoAnnotation>),
    Dataset { annotations: Vec<CocoAnnotation> },
}

/// Reads a detection-results file: either a bare list of records or a
/// document with an `annotations` list.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<CocoAnnotation>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match serde_json::from_str(&text).map_err(|e| Error::file(path, e))? {
        ResultsFile::List(v) => Ok(v),
        ResultsFile::Dataset { annotations } => Ok(annotations),
    }
}

pub fn ingest_predictions(path: impl AsRef<Path>, frames: &[Frame]) -> Result<IngestReport> {
    Ok(ingest_annotations(&load_predictions(path)?, frames, DetectionSource::External))
}
