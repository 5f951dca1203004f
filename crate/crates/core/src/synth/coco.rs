//! COCO-style instance annotations: writer for composed scenes, reader and
//! mask decoding shared with prediction ingest.
//!
//! Category ids: BPD = 1, TED = 2, TSD = 3. Masks are stored as uncompressed
//! column-major RLE; compressed RLE strings and polygons are accepted on read.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scene::SyntheticScene;
use crate::defect::DislocationType;
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, LocalMask};

pub const ANNOTATIONS_FILE: &str = "annotations.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    Raw(Vec<u64>),
    Compressed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rle {
    pub counts: RleCounts,
    /// `[height, width]`.
    pub size: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segmentation {
    Rle(Rle),
    Polygons(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    #[serde(default)]
    pub id: u64,
    pub image_id: u64,
    pub category_id: u32,
    /// `[x, y, width, height]` in pixels.
    pub bbox: [f64; 4],
    #[serde(default)]
    pub area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<Segmentation>,
    #[serde(default)]
    pub iscrowd: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u32,
    pub name: String,
    #[serde(default)]
    pub supercategory: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

pub fn categories() -> Vec<CocoCategory> {
    DislocationType::ALL
        .iter()
        .map(|t| CocoCategory {
            id: t.category_id(),
            name: t.name().into(),
            supercategory: "etch_pit".into(),
        })
        .collect()
}

/// Column-major run lengths of a full-frame mask, starting with background.
pub fn encode_rle(mask: &LocalMask, width: usize, height: usize) -> Rle {
    let mut counts = Vec::new();
    let (mut current, mut run) = (false, 0u64);
    for x in 0..width {
        for y in 0..height {
            let v = mask.contains(x, y);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    Rle {
        counts: RleCounts::Raw(counts),
        size: [height, width],
    }
}

fn decode_counts_string(s: &str) -> Result<Vec<u64>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let (mut x, mut k, mut more) = (0i64, 0u32, true);
        while more {
            let c = *bytes
                .get(p)
                .ok_or_else(|| Error::Format("truncated compressed RLE".into()))? as i64
                - 48;
            if !(0..64).contains(&c) {
                return Err(Error::Format(format!("invalid RLE character at {p}")));
            }
            x |= (c & 0x1f) << (5 * k);
            more = c & 0x20 != 0;
            p += 1;
            k += 1;
            if !more && c & 0x10 != 0 {
                x |= -1i64 << (5 * k);
            }
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2];
        }
        if x < 0 {
            return Err(Error::Format("negative run in compressed RLE".into()));
        }
        counts.push(x);
    }
    Ok(counts.into_iter().map(|c| c as u64).collect())
}

/// Full-frame mask from raw or compressed RLE.
pub fn decode_rle(rle: &Rle) -> Result<BinaryMask> {
    let [h, w] = rle.size;
    let counts = match &rle.counts {
        RleCounts::Raw(c) => c.clone(),
        RleCounts::Compressed(s) => decode_counts_string(s)?,
    };
    let total: u64 = counts.iter().sum();
    if total != (w * h) as u64 {
        return Err(Error::Format(format!("RLE covers {total} pixels, frame has {}", w * h)));
    }
    let mut mask = BinaryMask::new(w, h);
    let (mut pos, mut value) = (0usize, false);
    for c in counts {
        for i in pos..pos + c as usize {
            if value {
                mask.set(i / h, i % h, true);
            }
        }
        pos += c as usize;
        value = !value;
    }
    Ok(mask)
}

/// Even-odd fill of polygon rings (`[x0, y0, x1, y1, ...]`) at pixel centres.
pub fn rasterize_polygons(polys: &[Vec<f64>], width: usize, height: usize) -> BinaryMask {
    let mut mask = BinaryMask::new(width, height);
    for poly in polys {
        let pts: Vec<(f64, f64)> = poly.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        if pts.len() < 3 {
            continue;
        }
        for y in 0..height {
            let py = y as f64;
            let mut xs: Vec<f64> = Vec::new();
            for i in 0..pts.len() {
                let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
                if (a.1 <= py) != (b.1 <= py) {
                    xs.push(a.0 + (py - a.1) / (b.1 - a.1) * (b.0 - a.0));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let lo = pair[0].ceil().max(0.0) as usize;
                let hi = pair[1].floor().min(width as f64 - 1.0);
                if hi < 0.0 {
                    continue;
                }
                for x in lo..=hi as usize {
                    mask.set(x, y, !mask.get(x, y));
                }
            }
        }
    }
    mask
}

pub fn scene_file_name(index: usize) -> String {
    format!("scene_{index:05}.png")
}

/// Annotation document for scenes saved under [`scene_file_name`].
pub fn scenes_to_coco(scenes: &[SyntheticScene]) -> CocoDataset {
    let mut images = Vec::with_capacity(scenes.len());
    let mut annotations = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        let image_id = i as u64 + 1;
        let (w, h) = (s.image.width(), s.image.height());
        images.push(CocoImage {
            id: image_id,
            file_name: scene_file_name(i),
            width: w,
            height: h,
            seed: Some(s.seed),
        });
        for inst in &s.instances {
            let b = inst.bbox;
            annotations.push(CocoAnnotation {
                id: annotations.len() as u64 + 1,
                image_id,
                category_id: inst.dtype.category_id(),
                bbox: [b.x0 as f64, b.y0 as f64, b.width() as f64, b.height() as f64],
                area: inst.mask.area() as f64,
                segmentation: Some(Segmentation::Rle(encode_rle(&inst.mask, w, h))),
                iscrowd: 0,
                score: None,
            });
        }
    }
    CocoDataset {
        images,
        annotations,
        categories: categories(),
    }
}

/// Writes `images/scene_NNNNN.png` and [`ANNOTATIONS_FILE`] under `dir`.
pub fn export_dataset(scenes: &[SyntheticScene], dir: impl AsRef<Path>) -> Result<CocoDataset> {
    if scenes.is_empty() {
        return Err(Error::Precondition("no scenes to export".into()));
    }
    let dir = dir.as_ref();
    let images = dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    for (i, s) in scenes.iter().enumerate() {
        s.image.save_png(images.join(scene_file_name(i)))?;
    }
    let coco = scenes_to_coco(scenes);
    let path = dir.join(ANNOTATIONS_FILE);
    let json = serde_json::to_string(&coco).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(coco)
}

pub fn read_coco(path: impl AsRef<Path>) -> Result<CocoDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::file(path, e))
}
