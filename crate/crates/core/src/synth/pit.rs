//! Parametric etch-pit renderer used to build synthetic dictionaries and the
//! single/double quality corpus.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::defect::DislocationType;
use crate::dictionary::{DictEntry, Dictionary};
use crate::quality::LabeledPatchSet;
use crate::raster::{BinaryMask, GrayImage};

/// Border around the pit extent in rendered patches.
pub const PIT_BORDER: usize = 10;
/// Nominal direction of the shell axis for BPD pits, in radians.
pub const BPD_AXIS: f64 = 0.0;

/// One pit's geometry and shading, in canvas coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitShape {
    pub dtype: DislocationType,
    pub center: (f64, f64),
    /// Semi-axis along `angle` and across it.
    pub a: f64,
    pub b: f64,
    pub angle: f64,
    pub core_radius: f64,
    /// Offset of the core along the axis, as a fraction of `a`.
    pub core_shift: f64,
    pub floor: f32,
    pub core_level: f32,
    hex_phase: f64,
}

impl PitShape {
    pub fn random(dtype: DislocationType, center: (f64, f64), rng: &mut impl Rng) -> PitShape {
        let floor = rng.random_range(0.2..0.3);
        let core_level = rng.random_range(0.06..0.12);
        let hex_phase = rng.random_range(0.0..PI / 3.0);
        match dtype {
            DislocationType::Bpd => {
                let a = rng.random_range(10.0..13.5);
                let l = rng.random_range(1.9..2.4);
                PitShape {
                    dtype,
                    center,
                    a,
                    b: a / l,
                    angle: BPD_AXIS + rng.random_range(-0.12..0.12),
                    core_radius: rng.random_range(1.5..2.2),
                    core_shift: -0.45,
                    floor,
                    core_level,
                    hex_phase,
                }
            }
            DislocationType::Ted | DislocationType::Tsd => {
                let r = if dtype == DislocationType::Ted {
                    rng.random_range(5.0..7.0)
                } else {
                    rng.random_range(10.5..13.5)
                };
                PitShape {
                    dtype,
                    center,
                    a: r,
                    b: r,
                    angle: 0.0,
                    core_radius: rng.random_range(1.2..1.8) * r / 6.0,
                    core_shift: 0.0,
                    floor,
                    core_level,
                    hex_phase,
                }
            }
        }
    }

    /// Largest distance from the centre to the rim.
    pub fn extent(&self) -> f64 {
        self.a.max(self.b) * 1.1
    }

    /// Normalized radius: below 1 inside the pit.
    pub fn level(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (c, s) = (self.angle.cos(), self.angle.sin());
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        match self.dtype {
            DislocationType::Bpd => {
                // shell: wide head at -u, tapering tail at +u
                let taper = (1.0 - 0.35 * (u / self.a).clamp(-1.0, 1.0)).max(0.2);
                ((u / self.a).powi(2) + (v / (self.b * taper)).powi(2)).sqrt()
            }
            _ => {
                let phi = v.atan2(u);
                let r = self.a * (1.0 + 0.05 * (6.0 * phi + self.hex_phase).cos());
                (u * u + v * v).sqrt() / r
            }
        }
    }

    fn in_core(&self, x: f64, y: f64) -> bool {
        let cx = self.center.0 + self.core_shift * self.a * self.angle.cos();
        let cy = self.center.1 + self.core_shift * self.a * self.angle.sin();
        (x - cx).powi(2) + (y - cy).powi(2) <= self.core_radius.powi(2)
    }

    /// Darkens `canvas` by min-blending and marks pit pixels in `mask`.
    pub fn paint(&self, canvas: &mut GrayImage, mask: &mut BinaryMask) {
        let e = self.extent() + 2.0;
        let x0 = (self.center.0 - e).floor().max(0.0) as usize;
        let y0 = (self.center.1 - e).floor().max(0.0) as usize;
        let x1 = ((self.center.0 + e).ceil() as usize).min(canvas.width() - 1);
        let y1 = ((self.center.1 + e).ceil() as usize).min(canvas.height() - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (fx, fy) = (x as f64, y as f64);
                let s = self.level(fx, fy);
                let bg = canvas.get(x, y);
                let rim = self.floor + (bg - self.floor) * 0.35;
                let v = if s <= 1.0 {
                    mask.set(x, y, true);
                    if self.in_core(fx, fy) {
                        self.core_level
                    } else {
                        self.floor + (rim - self.floor) * s as f32
                    }
                } else {
                    // one-pixel soft rim outside the mask
                    let t = ((s - 1.0) * self.a).clamp(0.0, 1.0) as f32;
                    rim * (1.0 - t) + bg * t
                };
                canvas.set(x, y, v.min(bg));
            }
        }
    }
}

/// Flat field with grain, as seen around a pit.
pub fn plain_canvas(width: usize, height: usize, rng: &mut impl Rng) -> GrayImage {
    let level: f32 = rng.random_range(0.72..0.82);
    let grain = Normal::new(0.0f32, 0.012).unwrap();
    GrayImage::from_fn(width, height, |_, _| (level + grain.sample(rng)).clamp(0.0, 1.0))
}

/// Cuts the mask's bounding box grown by [`PIT_BORDER`], the same window
/// patch extraction uses around a segmented blob.
fn crop_to_mask(canvas: &GrayImage, mask: &BinaryMask) -> (GrayImage, BinaryMask) {
    let (x0, y0, x1, y1) = mask.bbox().expect("pit painted");
    let cx0 = x0.saturating_sub(PIT_BORDER);
    let cy0 = y0.saturating_sub(PIT_BORDER);
    let cx1 = (x1 + PIT_BORDER).min(canvas.width() - 1);
    let cy1 = (y1 + PIT_BORDER).min(canvas.height() - 1);
    let img = canvas.crop(cx0, cy0, cx1, cy1).quantized();
    let m = BinaryMask::from_fn(cx1 - cx0 + 1, cy1 - cy0 + 1, |x, y| mask.get(x + cx0, y + cy0));
    (img, m)
}

/// Renders one pit with [`PIT_BORDER`] pixels of field around its mask.
pub fn render_pit(dtype: DislocationType, rng: &mut impl Rng) -> (GrayImage, BinaryMask) {
    let probe = PitShape::random(dtype, (0.0, 0.0), rng);
    let half = probe.extent().ceil() as usize + PIT_BORDER + 2;
    let side = 2 * half + 1;
    let mut canvas = plain_canvas(side, side, rng);
    let mut mask = BinaryMask::new(side, side);
    let jitter = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let shape = PitShape {
        center: (half as f64 + jitter.0, half as f64 + jitter.1),
        ..probe
    };
    shape.paint(&mut canvas, &mut mask);
    crop_to_mask(&canvas, &mask)
}

/// `per_type` rendered pits of each type, quantized to 8 bits so that a
/// PNG round trip is lossless.
pub fn synthetic_dictionary(per_type: usize, rng: &mut impl Rng) -> Dictionary {
    let mut entries = Vec::with_capacity(3 * per_type);
    for t in DislocationType::ALL {
        for i in 0..per_type {
            let (image, mask) = render_pit(t, rng);
            entries.push(DictEntry {
                id: format!("{}_{i:04}", t.name().to_lowercase()),
                dtype: t,
                image,
                mask,
                source: "rendered".into(),
            });
        }
    }
    Dictionary { entries }
}

/// Two pits whose rims touch or overlap, cropped like an extracted patch.
pub fn render_double(rng: &mut impl Rng) -> (GrayImage, BinaryMask) {
    let ta = DislocationType::ALL[rng.random_range(0..3)];
    let tb = DislocationType::ALL[rng.random_range(0..3)];
    let a = PitShape::random(ta, (0.0, 0.0), rng);
    let b = PitShape::random(tb, (0.0, 0.0), rng);
    let sep = (a.extent() + b.extent()) * rng.random_range(0.45..0.95);
    let phi = rng.random_range(0.0..2.0 * PI);
    let span = a.extent() + sep + b.extent();
    let half = span.ceil() as usize + PIT_BORDER + 2;
    let side = 2 * half + 1;
    let mut canvas = plain_canvas(side, side, rng);
    let mut mask = BinaryMask::new(side, side);
    let c = half as f64;
    let pa = PitShape { center: (c, c), ..a };
    let pb = PitShape {
        center: (c + sep * phi.cos(), c + sep * phi.sin()),
        ..b
    };
    pa.paint(&mut canvas, &mut mask);
    pb.paint(&mut canvas, &mut mask);
    crop_to_mask(&canvas, &mask)
}

/// Quality corpus: `n` single pits (label 1) and `n` double pits (label 0),
/// interleaved.
pub fn single_double_corpus(n: usize, rng: &mut impl Rng) -> LabeledPatchSet {
    let mut set = LabeledPatchSet::default();
    for i in 0..n {
        let t = DislocationType::ALL[rng.random_range(0..3)];
        set.push(format!("single_{i:05}"), render_pit(t, rng).0, 1);
        set.push(format!("double_{i:05}"), render_double(rng).0, 0);
    }
    set
}
