//! Background flattening (rolling ball) and local contrast equalization (CLAHE).

use crate::error::{Error, Result};
use crate::raster::GrayImage;

const BINS: usize = 256;

/// Rolling-ball background subtraction followed by CLAHE.
///
/// Pits are dark on a bright field, so the ball rolls along the upper
/// envelope. The residual maps flat background to 1 and the darkest 0.1 %
/// of residual pixels to 0 before equalization.
pub fn correct_contrast(
    img: &GrayImage,
    ball_radius: usize,
    clahe_clip: f64,
    clahe_tiles: usize,
) -> Result<GrayImage> {
    if ball_radius < 1 {
        return Err(Error::Precondition("ball radius must be >= 1".into()));
    }
    check_clahe_size(img, clahe_tiles)?;
    let background = rolling_ball_background(img, ball_radius);
    let flat = subtract_background(img, &background);
    clahe(&flat, clahe_clip, clahe_tiles)
}

fn check_clahe_size(img: &GrayImage, tiles: usize) -> Result<()> {
    if tiles < 1 {
        return Err(Error::Precondition("CLAHE tile count must be >= 1".into()));
    }
    if img.width() < tiles || img.height() < tiles {
        return Err(Error::Sizing(format!(
            "image {}x{} is smaller than one CLAHE tile of a {}x{} grid",
            img.width(),
            img.height(),
            tiles,
            tiles
        )));
    }
    Ok(())
}

fn shrink_factor(radius: usize) -> usize {
    match radius {
        0..=10 => 1,
        11..=30 => 2,
        31..=100 => 4,
        _ => 8,
    }
}

/// Upper-envelope background: grayscale closing with a spherical element.
///
/// Large radii run on a max-pooled copy and are interpolated back, the
/// usual shortcut for this filter. Ball heights are in 8-bit intensity
/// units. The result never lies below the input.
pub fn rolling_ball_background(img: &GrayImage, radius: usize) -> GrayImage {
    let f = shrink_factor(radius);
    let (w, h) = (img.width(), img.height());
    let sw = w.div_ceil(f);
    let sh = h.div_ceil(f);
    let mut small = vec![0f32; sw * sh];
    for sy in 0..sh {
        for sx in 0..sw {
            let mut m = 0f32;
            for y in sy * f..((sy + 1) * f).min(h) {
                for x in sx * f..((sx + 1) * f).min(w) {
                    m = m.max(img.get(x, y));
                }
            }
            small[sy * sw + sx] = m;
        }
    }

    let r = (radius as f64 / f as f64).max(1.0);
    let half = r.floor() as isize;
    let mut ball = Vec::new();
    for dy in -half..=half {
        for dx in -half..=half {
            let d2 = (dx * dx + dy * dy) as f64;
            if d2 <= r * r {
                ball.push((dx, dy, (((r * r - d2).sqrt() - r) / 255.0) as f32));
            }
        }
    }

    let dilated = grey_morph(&small, sw, sh, &ball, true);
    let closed = grey_morph(&dilated, sw, sh, &ball, false);

    let mut bg = GrayImage::from_fn(w, h, |x, y| {
        let fx = ((x as f64 + 0.5) / f as f64 - 0.5).clamp(0.0, (sw - 1) as f64);
        let fy = ((y as f64 + 0.5) / f as f64 - 0.5).clamp(0.0, (sh - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(sw - 1);
        let y1 = (y0 + 1).min(sh - 1);
        let tx = (fx - x0 as f64) as f32;
        let ty = (fy - y0 as f64) as f32;
        let at = |xx: usize, yy: usize| closed[yy * sw + xx];
        let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
        let bot = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
        top * (1.0 - ty) + bot * ty
    });
    for y in 0..h {
        for x in 0..w {
            let v = bg.get(x, y).max(img.get(x, y));
            bg.set(x, y, v);
        }
    }
    bg
}

fn grey_morph(src: &[f32], w: usize, h: usize, ball: &[(isize, isize, f32)], dilate: bool) -> Vec<f32> {
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = if dilate { f32::NEG_INFINITY } else { f32::INFINITY };
            for &(dx, dy, z) in ball {
                let xx = x as isize + dx;
                let yy = y as isize + dy;
                if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                    continue;
                }
                let v = src[yy as usize * w + xx as usize];
                if dilate {
                    acc = acc.max(v + z);
                } else {
                    acc = acc.min(v - z);
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Maps `img - background` (never positive) onto `[0, 1]`: background to 1,
/// the 0.1 % quantile of the residual to 0.
pub fn subtract_background(img: &GrayImage, background: &GrayImage) -> GrayImage {
    let residual: Vec<f32> = img
        .data()
        .iter()
        .zip(background.data())
        .map(|(&v, &b)| (v - b).min(0.0))
        .collect();
    let mut sorted = residual.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = sorted[((sorted.len() - 1) as f64 * 0.001).round() as usize];
    if q > -1e-6 {
        return GrayImage::new(img.width(), img.height(), 1.0);
    }
    let data = residual
        .iter()
        .map(|&r| ((r - q) / -q).clamp(0.0, 1.0))
        .collect();
    GrayImage::from_vec(img.width(), img.height(), data).expect("values clamped")
}

/// Contrast-limited adaptive histogram equalization on a `tiles x tiles` grid
/// with bilinear blending between tile mappings.
pub fn clahe(img: &GrayImage, clip: f64, tiles: usize) -> Result<GrayImage> {
    check_clahe_size(img, tiles)?;
    let (w, h) = (img.width(), img.height());
    let xs: Vec<usize> = (0..=tiles).map(|k| k * w / tiles).collect();
    let ys: Vec<usize> = (0..=tiles).map(|k| k * h / tiles).collect();

    let mut luts = vec![[0f32; BINS]; tiles * tiles];
    for ty in 0..tiles {
        for tx in 0..tiles {
            let mut hist = [0usize; BINS];
            for y in ys[ty]..ys[ty + 1] {
                for x in xs[tx]..xs[tx + 1] {
                    hist[bin(img.get(x, y))] += 1;
                }
            }
            let area = (xs[tx + 1] - xs[tx]) * (ys[ty + 1] - ys[ty]);
            luts[ty * tiles + tx] = tile_lut(&mut hist, area, clip);
        }
    }

    let centers = |bounds: &[usize]| -> Vec<f64> {
        bounds
            .windows(2)
            .map(|b| (b[0] + b[1]) as f64 / 2.0 - 0.5)
            .collect()
    };
    let cx = centers(&xs);
    let cy = centers(&ys);
    let locate = |c: &[f64], p: f64| -> (usize, usize, f32) {
        if p <= c[0] {
            return (0, 0, 0.0);
        }
        if p >= c[c.len() - 1] {
            return (c.len() - 1, c.len() - 1, 0.0);
        }
        let i = c.iter().rposition(|&v| v <= p).unwrap_or(0);
        let t = (p - c[i]) / (c[i + 1] - c[i]);
        (i, i + 1, t as f32)
    };

    let mut out = GrayImage::new(w, h, 0.0);
    for y in 0..h {
        let (y0, y1, ty) = locate(&cy, y as f64);
        for x in 0..w {
            let (x0, x1, tx) = locate(&cx, x as f64);
            let b = bin(img.get(x, y));
            let l = |ix: usize, iy: usize| luts[iy * tiles + ix][b];
            let top = l(x0, y0) * (1.0 - tx) + l(x1, y0) * tx;
            let bot = l(x0, y1) * (1.0 - tx) + l(x1, y1) * tx;
            out.set(x, y, top * (1.0 - ty) + bot * ty);
        }
    }
    Ok(out)
}

#[inline]
fn bin(v: f32) -> usize {
    ((v * 255.0).round() as isize).clamp(0, BINS as isize - 1) as usize
}

fn tile_lut(hist: &mut [usize; BINS], area: usize, clip: f64) -> [f32; BINS] {
    let mut lut = [0f32; BINS];
    if area == 0 {
        return lut;
    }
    if clip > 0.0 {
        let limit = ((clip * area as f64 / BINS as f64) as usize).max(1);
        let mut excess = 0usize;
        for h in hist.iter_mut() {
            if *h > limit {
                excess += *h - limit;
                *h = limit;
            }
        }
        let per_bin = excess / BINS;
        let remainder = excess % BINS;
        for h in hist.iter_mut() {
            *h += per_bin;
        }
        if remainder > 0 {
            let step = (BINS / remainder).max(1);
            let mut i = 0;
            let mut left = remainder;
            while i < BINS && left > 0 {
                hist[i] += 1;
                left -= 1;
                i += step;
            }
        }
    }
    let mut cdf = 0usize;
    for (i, &h) in hist.iter().enumerate() {
        cdf += h;
        lut[i] = (cdf as f64 / area as f64).min(1.0) as f32;
    }
    lut
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Linear shading from 0.8 (top-left) to 0.2 (bottom-right) with a grid
    /// of radius-3 dots 0.2 darker than the local background.
    pub(crate) fn shaded_dots() -> (GrayImage, Vec<(usize, usize)>) {
        let (w, h) = (256usize, 256usize);
        let mut centers = Vec::new();
        for gy in 0..8 {
            for gx in 0..8 {
                centers.push((16 + gx * 32, 16 + gy * 32));
            }
        }
        let img = GrayImage::from_fn(w, h, |x, y| {
            let t = (x as f32 / (w - 1) as f32 + y as f32 / (h - 1) as f32) / 2.0;
            let bg = 0.8 - 0.6 * t;
            let in_dot = centers.iter().any(|&(cx, cy)| {
                let dx = x as f32 - cx as f32;
                let dy = y as f32 - cy as f32;
                dx * dx + dy * dy <= 9.0
            });
            if in_dot {
                bg - 0.2
            } else {
                bg
            }
        });
        (img, centers)
    }

    fn quadrant_means(img: &GrayImage) -> [f64; 4] {
        let (w, h) = (img.width(), img.height());
        let mut sums = [0f64; 4];
        let mut counts = [0usize; 4];
        for y in 0..h {
            for x in 0..w {
                let q = (x >= w / 2) as usize + 2 * (y >= h / 2) as usize;
                sums[q] += img.get(x, y) as f64;
                counts[q] += 1;
            }
        }
        [0, 1, 2, 3].map(|q| sums[q] / counts[q] as f64)
    }

    /// Fraction of dots recovered as a compact dark blob near their center.
    fn dot_recall(img: &GrayImage, centers: &[(usize, usize)], threshold: f32) -> f64 {
        let blobs = crate::imgproc::segment_candidates(img, threshold, &[]).unwrap();
        let found = centers
            .iter()
            .filter(|&&(cx, cy)| {
                blobs.iter().any(|b| {
                    b.area <= 60
                        && (b.centroid.0 - cx as f64).abs() < 2.0
                        && (b.centroid.1 - cy as f64).abs() < 2.0
                })
            })
            .count();
        found as f64 / centers.len() as f64
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = GrayImage::new(64, 48, 0.5);
        let bg = rolling_ball_background(&img, 50);
        assert_eq!(bg, img);
        let out = correct_contrast(&img, 50, 2.0, 8).unwrap();
        let v0 = out.get(0, 0);
        assert!(out.data().iter().all(|&v| v == v0));
        let again = correct_contrast(&out, 50, 2.0, 8).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn clahe_of_constant_is_constant() {
        for level in [0.0f32, 0.3, 0.5, 1.0] {
            let img = GrayImage::new(40, 40, level);
            let out = clahe(&img, 2.0, 8).unwrap();
            let v0 = out.get(0, 0);
            assert!(out.data().iter().all(|&v| (v - v0).abs() < 1e-7));
        }
    }

    #[test]
    fn too_small_for_tiles_is_sizing_error() {
        let img = GrayImage::new(5, 20, 0.5);
        assert!(matches!(correct_contrast(&img, 10, 2.0, 8), Err(Error::Sizing(_))));
        assert!(matches!(clahe(&img, 2.0, 8), Err(Error::Sizing(_))));
    }

    #[test]
    fn bad_parameters_rejected() {
        let img = GrayImage::new(32, 32, 0.5);
        assert!(correct_contrast(&img, 0, 2.0, 4).is_err());
        assert!(correct_contrast(&img, 5, 2.0, 0).is_err());
    }

    #[test]
    fn shading_removed_quadrants_agree() {
        let (img, _) = shaded_dots();
        let before = quadrant_means(&img);
        let spread_before = before.iter().cloned().fold(f64::MIN, f64::max)
            / before.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread_before > 1.5, "fixture must be shaded: {before:?}");
        let out = correct_contrast(&img, 50, 2.0, 8).unwrap();
        let after = quadrant_means(&out);
        let mean = after.iter().sum::<f64>() / 4.0;
        for q in after {
            assert!((q - mean).abs() / mean < 0.05, "{after:?}");
        }
    }

    #[test]
    fn correction_recovers_dark_corner_dots() {
        let (img, centers) = shaded_dots();
        let raw = dot_recall(&img, &centers, 0.45);
        let out = correct_contrast(&img, 50, 2.0, 8).unwrap();
        let fixed = dot_recall(&out, &centers, 0.45);
        assert!(raw < 0.6, "raw recall {raw}");
        assert!(fixed > 0.95, "corrected recall {fixed}");
    }

    #[test]
    fn background_never_below_input() {
        let (img, _) = shaded_dots();
        let bg = rolling_ball_background(&img, 20);
        assert!(img.data().iter().zip(bg.data()).all(|(&v, &b)| b >= v));
    }

    proptest::proptest! {
        #[test]
        fn output_in_unit_range(seed in 0u64..1000, radius in 1usize..40) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = GrayImage::from_fn(48, 40, |_, _| rng.random::<f32>());
            let out = correct_contrast(&img, radius, 2.0, 4).unwrap();
            proptest::prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
