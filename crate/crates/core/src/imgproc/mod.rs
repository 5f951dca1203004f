//! Classical pit segmentation: contrast correction, thresholding, morphology,
//! ellipse fit, shape gating and patch extraction.

mod contrast;
mod ellipse;
mod gate;
mod label;
mod morphology;
mod patch;

pub use contrast::{clahe, correct_contrast, rolling_ball_background, subtract_background};
pub use ellipse::{central_moments, fit_ellipse, EllipseFit};
pub use gate::{
    contour_perimeter, descriptors, judge, shape_gate, GateLimits, GateVerdict, RejectReason,
    ShapeDescriptors,
};
pub use label::{binarize, label_components, segment_candidates, BBox, Blob, MIN_BLOB_AREA};
pub use morphology::{apply_plan, dilate, erode, MorphKind, MorphStep};
pub use patch::{extract_patch, patch_region, Patch, PatchRegion, DEFAULT_BORDER};

use serde::{Deserialize, Serialize};

/// Segmentation settings with the pipeline defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImgprocParams {
    pub threshold: f32,
    pub ball_radius: usize,
    pub clahe_clip: f64,
    pub clahe_tiles: usize,
    pub morph_plan: Vec<MorphStep>,
    pub border: usize,
    pub limits: GateLimits,
}

impl Default for ImgprocParams {
    fn default() -> Self {
        ImgprocParams {
            threshold: 0.45,
            ball_radius: 50,
            clahe_clip: 2.0,
            clahe_tiles: 8,
            morph_plan: vec![MorphStep::new(MorphKind::Open, 1)],
            border: DEFAULT_BORDER,
            limits: GateLimits::default(),
        }
    }
}

/// One segmented candidate with its fit, descriptors and gate verdict.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub blob: Blob,
    pub fit: EllipseFit,
    pub descriptors: ShapeDescriptors,
    pub verdict: GateVerdict,
}

/// Runs correction, segmentation, fitting and gating on one tile.
pub fn find_candidates(
    img: &crate::raster::GrayImage,
    params: &ImgprocParams,
) -> crate::error::Result<(crate::raster::GrayImage, Vec<Candidate>)> {
    let corrected = correct_contrast(img, params.ball_radius, params.clahe_clip, params.clahe_tiles)?;
    let blobs = segment_candidates(&corrected, params.threshold, &params.morph_plan)?;
    let mut out = Vec::with_capacity(blobs.len());
    for blob in blobs {
        let fit = fit_ellipse(&blob)?;
        let (descriptors, verdict) = shape_gate(&blob, &fit, &params.limits);
        out.push(Candidate {
            blob,
            fit,
            descriptors,
            verdict,
        });
    }
    Ok((corrected, out))
}
