//! Thresholding and 8-connected component labeling.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::morphology::{apply_plan, MorphStep};
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GrayImage};

/// Blobs smaller than this are salt noise.
pub const MIN_BLOB_AREA: usize = 4;

/// Inclusive pixel box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 as f64 && x <= self.x1 as f64 && y >= self.y0 as f64 && y <= self.y1 as f64
    }
}

/// A connected group of foreground pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub pixels: Vec<(u32, u32)>,
    pub bbox: BBox,
    pub area: usize,
    pub centroid: (f64, f64),
}

impl Blob {
    /// Builds a blob from an arbitrary non-empty pixel list (connectivity is not checked).
    pub fn from_pixels(pixels: Vec<(u32, u32)>) -> Self {
        assert!(!pixels.is_empty(), "blob needs at least one pixel");
        let mut bbox = BBox {
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        };
        let (mut sx, mut sy) = (0f64, 0f64);
        for &(x, y) in &pixels {
            let (x, y) = (x as usize, y as usize);
            bbox.x0 = bbox.x0.min(x);
            bbox.y0 = bbox.y0.min(y);
            bbox.x1 = bbox.x1.max(x);
            bbox.y1 = bbox.y1.max(y);
            sx += x as f64;
            sy += y as f64;
        }
        let n = pixels.len();
        Blob {
            area: n,
            centroid: (sx / n as f64, sy / n as f64),
            bbox,
            pixels,
        }
    }

    pub fn from_mask(mask: &BinaryMask) -> Option<Self> {
        let pts = mask.points();
        (!pts.is_empty()).then(|| Blob::from_pixels(pts))
    }

    /// Mask of the blob over its bounding box.
    pub fn local_mask(&self) -> BinaryMask {
        let mut m = BinaryMask::new(self.bbox.width(), self.bbox.height());
        for &(x, y) in &self.pixels {
            m.set(x as usize - self.bbox.x0, y as usize - self.bbox.y0, true);
        }
        m
    }
}

/// Foreground = intensity strictly below `threshold` (pits are dark).
pub fn binarize(img: &GrayImage, threshold: f32) -> BinaryMask {
    BinaryMask::from_fn(img.width(), img.height(), |x, y| img.get(x, y) < threshold)
}

/// All 8-connected components, ordered by their first pixel in raster order.
pub fn label_components(mask: &BinaryMask) -> Vec<Blob> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut blobs = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || !mask.bits()[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            pixels.push((x as u32, y as u32));
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && mask.bits()[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        pixels.sort_by_key(|&(x, y)| (y, x));
        blobs.push(Blob::from_pixels(pixels));
    }
    blobs
}

/// Threshold, apply the morphology plan in order, label, and drop blobs under 4 px.
pub fn segment_candidates(img: &GrayImage, threshold: f32, plan: &[MorphStep]) -> Result<Vec<Blob>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Precondition(format!(
            "threshold {threshold} outside (0,1)"
        )));
    }
    let mask = apply_plan(&binarize(img, threshold), plan);
    Ok(label_components(&mask)
        .into_iter()
        .filter(|b| b.area >= MIN_BLOB_AREA)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::morphology::MorphKind;

    fn with_dark(w: usize, h: usize, dark: impl Fn(usize, usize) -> bool) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| if dark(x, y) { 0.1 } else { 0.9 })
    }

    fn in_sq(x: usize, y: usize, x0: usize, y0: usize) -> bool {
        (x0..x0 + 5).contains(&x) && (y0..y0 + 5).contains(&y)
    }

    #[test]
    fn two_squares_two_blobs() {
        let img = with_dark(30, 20, |x, y| in_sq(x, y, 2, 2) || in_sq(x, y, 15, 10));
        let blobs = segment_candidates(&img, 0.45, &[]).unwrap();
        assert_eq!(blobs.len(), 2);
        assert!(blobs.iter().all(|b| b.area == 25));
    }

    /// Naive label propagation: repeat min-label relaxation over 8-neighbours until stable.
    fn oracle_component_sizes(mask: &BinaryMask) -> Vec<usize> {
        let (w, h) = (mask.width(), mask.height());
        let mut lab: Vec<Option<usize>> =
            (0..w * h).map(|i| mask.bits()[i].then_some(i)).collect();
        loop {
            let mut changed = false;
            for y in 0..h {
                for x in 0..w {
                    let Some(l) = lab[y * w + x] else { continue };
                    let mut m = l;
                    for (dx, dy) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                            if let Some(o) = lab[ny as usize * w + nx as usize] {
                                m = m.min(o);
                            }
                        }
                    }
                    if m < l {
                        lab[y * w + x] = Some(m);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut sizes = std::collections::BTreeMap::new();
        for l in lab.into_iter().flatten() {
            *sizes.entry(l).or_insert(0usize) += 1;
        }
        sizes.into_values().collect()
    }

    #[test]
    fn bridge_removed_by_opening() {
        // squares at x 2..7 and 10..15 on rows 5..10, bridged on row 7
        let img = with_dark(20, 15, |x, y| {
            in_sq(x, y, 2, 5) || in_sq(x, y, 10, 5) || (y == 7 && (7..10).contains(&x))
        });
        let plan = [MorphStep::new(MorphKind::Open, 1)];
        let raw_sizes = oracle_component_sizes(&binarize(&img, 0.45));
        let open_sizes = oracle_component_sizes(&apply_plan(&binarize(&img, 0.45), &plan));
        assert_eq!(raw_sizes, vec![53]);
        assert_eq!(open_sizes, vec![25, 25]);

        let raw = segment_candidates(&img, 0.45, &[]).unwrap();
        assert_eq!(raw.iter().map(|b| b.area).collect::<Vec<_>>(), raw_sizes);
        let opened = segment_candidates(&img, 0.45, &plan).unwrap();
        assert_eq!(opened.iter().map(|b| b.area).collect::<Vec<_>>(), open_sizes);
    }

    #[test]
    fn white_image_no_blobs() {
        let img = GrayImage::new(16, 16, 1.0);
        assert!(segment_candidates(&img, 0.45, &[]).unwrap().is_empty());
    }

    #[test]
    fn all_foreground_single_blob() {
        let img = GrayImage::new(16, 12, 0.0);
        let blobs = segment_candidates(&img, 0.45, &[]).unwrap();
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].area, 192);
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let img = with_dark(10, 10, |x, y| x == y);
        let blobs = segment_candidates(&img, 0.45, &[]).unwrap();
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].area, 10);
    }

    #[test]
    fn tiny_blobs_dropped() {
        let img = with_dark(10, 10, |x, y| (x == 2 && y == 2) || (x == 7 && (5..8).contains(&y)));
        assert!(segment_candidates(&img, 0.45, &[]).unwrap().is_empty());
    }

    #[test]
    fn threshold_out_of_range() {
        let img = GrayImage::new(4, 4, 0.5);
        assert!(segment_candidates(&img, 0.0, &[]).is_err());
        assert!(segment_candidates(&img, 1.0, &[]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn labels_partition_foreground(seed in 0u64..500, density in 0.05f64..0.7) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mask = BinaryMask::from_fn(24, 18, |_, _| rng.random::<f64>() < density);
            let blobs = label_components(&mask);
            let total: usize = blobs.iter().map(|b| b.area).sum();
            proptest::prop_assert_eq!(total, mask.count());
            let mut seen = std::collections::HashSet::new();
            for b in &blobs {
                proptest::prop_assert!(b.bbox.contains(b.centroid.0, b.centroid.1));
                for p in &b.pixels {
                    proptest::prop_assert!(seen.insert(*p));
                }
            }
            let kept: usize = blobs.iter().filter(|b| b.area >= MIN_BLOB_AREA).map(|b| b.area).sum();
            proptest::prop_assert!(kept <= mask.count());
        }
    }
}
