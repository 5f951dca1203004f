//! Patch extraction around candidate blobs.

use serde::{Deserialize, Serialize};

use super::label::{BBox, Blob};
use crate::raster::{BinaryMask, GrayImage};

/// Default border added around a blob's bounding box.
pub const DEFAULT_BORDER: usize = 10;

/// Image region around one blob, in tile coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: GrayImage,
    /// Blob pixels in patch coordinates.
    pub mask: BinaryMask,
    pub origin: (usize, usize),
    pub region: BBox,
    pub border: usize,
    /// The dilated box was cut at a tile edge.
    pub clipped: bool,
    /// Index of the source blob in the segmentation output, when known.
    pub blob_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchRegion {
    pub region: BBox,
    pub clipped: bool,
}

/// Bounding box dilated by `border`, clipped to a `width x height` tile.
pub fn patch_region(bbox: BBox, border: usize, width: usize, height: usize) -> PatchRegion {
    let x0 = bbox.x0.saturating_sub(border);
    let y0 = bbox.y0.saturating_sub(border);
    let x1 = (bbox.x1 + border).min(width - 1);
    let y1 = (bbox.y1 + border).min(height - 1);
    let clipped = bbox.x0 < border
        || bbox.y0 < border
        || bbox.x1 + border > width - 1
        || bbox.y1 + border > height - 1;
    PatchRegion {
        region: BBox { x0, y0, x1, y1 },
        clipped,
    }
}

pub fn extract_patch(img: &GrayImage, blob: &Blob, border: usize) -> Patch {
    let PatchRegion { region, clipped } = patch_region(blob.bbox, border, img.width(), img.height());
    let image = img.crop(region.x0, region.y0, region.x1, region.y1);
    let mut mask = BinaryMask::new(region.width(), region.height());
    for &(x, y) in &blob.pixels {
        mask.set(x as usize - region.x0, y as usize - region.y0, true);
    }
    Patch {
        image,
        mask,
        origin: (region.x0, region.y0),
        region,
        border,
        clipped,
        blob_index: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x0: usize, y0: usize, x1: usize, y1: usize) -> BBox {
        BBox { x0, y0, x1, y1 }
    }

    #[test]
    fn interior_box_grows_by_border() {
        let r = patch_region(bb(100, 100, 110, 112), 10, 1292, 968);
        assert_eq!(r.region, bb(90, 90, 120, 122));
        assert!(!r.clipped);
    }

    #[test]
    fn corner_box_is_clipped() {
        let r = patch_region(bb(0, 0, 8, 8), 10, 1292, 968);
        assert_eq!(r.region, bb(0, 0, 18, 18));
        assert!(r.clipped);
        let r = patch_region(bb(1285, 960, 1291, 967), 10, 1292, 968);
        assert_eq!(r.region, bb(1275, 950, 1291, 967));
        assert!(r.clipped);
    }

    #[test]
    fn zero_border_is_bbox() {
        let r = patch_region(bb(3, 4, 9, 7), 0, 20, 20);
        assert_eq!(r.region, bb(3, 4, 9, 7));
        assert!(!r.clipped);
    }

    #[test]
    fn patch_carries_mask() {
        let img = GrayImage::from_fn(40, 30, |x, y| if (10..15).contains(&x) && (8..12).contains(&y) { 0.1 } else { 0.9 });
        let blob = crate::imgproc::segment_candidates(&img, 0.5, &[]).unwrap().remove(0);
        let p = extract_patch(&img, &blob, 3);
        assert_eq!(p.origin, (7, 5));
        assert_eq!((p.image.width(), p.image.height()), (11, 10));
        assert_eq!(p.mask.count(), 20);
        assert!(p.mask.get(3, 3));
        assert_eq!(p.image.get(3, 3), img.get(10, 8));
    }
}
