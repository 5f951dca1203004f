//! Background textures: non-parametric growth from a seed image, and a cheap
//! procedural field for large scene batches.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Candidates within `(1 + EPSILON)` of the best match are sampled uniformly.
pub const EPSILON: f64 = 0.1;
pub const DEFAULT_WINDOW: usize = 11;

/// Grows a `width x height` texture from `seed`, one pixel at a time.
///
/// The seed is copied to the centre of the output. Each pass collects the
/// unfilled pixels touching the filled region and visits them by decreasing
/// count of filled pixels in their window. A pixel is matched against every
/// full window of the seed with Gaussian-weighted SSD over the filled part of
/// its neighbourhood; the centre value of a uniformly drawn near-best window
/// is copied.
pub fn grow_texture(seed: &GrayImage, width: usize, height: usize, window: usize, rng_seed: u64) -> Result<GrayImage> {
    let (sw, sh) = (seed.width(), seed.height());
    if window % 2 == 0 || window == 0 {
        return Err(Error::Precondition(format!("window {window} must be odd")));
    }
    if window > sw || window > sh {
        return Err(Error::Precondition(format!("window {window} exceeds seed {sw}x{sh}")));
    }
    if width < sw || height < sh {
        return Err(Error::Precondition(format!(
            "output {width}x{height} smaller than seed {sw}x{sh}"
        )));
    }
    let half = window / 2;
    let sigma = window as f64 / 6.4;
    let offsets: Vec<(isize, isize, f64)> = (-(half as isize)..=half as isize)
        .flat_map(|dy| (-(half as isize)..=half as isize).map(move |dx| (dx, dy)))
        .filter(|&o| o != (0, 0))
        .map(|(dx, dy)| (dx, dy, (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp()))
        .collect();
    let centers: Vec<(usize, usize)> = (half..sh - half)
        .flat_map(|y| (half..sw - half).map(move |x| (x, y)))
        .collect();

    let mut out = vec![0.0f32; width * height];
    let mut filled = vec![false; width * height];
    let (ox, oy) = ((width - sw) / 2, (height - sh) / 2);
    for y in 0..sh {
        for x in 0..sw {
            out[(y + oy) * width + x + ox] = seed.get(x, y);
            filled[(y + oy) * width + x + ox] = true;
        }
    }
    let mut remaining = width * height - sw * sh;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let at = |x: usize, dx: isize, lim: usize| -> Option<usize> {
        let v = x as isize + dx;
        (v >= 0 && (v as usize) < lim).then_some(v as usize)
    };

    while remaining > 0 {
        let mut frontier: Vec<(usize, usize)> = Vec::new();
        for y in 0..height {
            for x in 0..width {
                if filled[y * width + x] {
                    continue;
                }
                let mut count = 0;
                for &(dx, dy, _) in &offsets {
                    if let (Some(nx), Some(ny)) = (at(x, dx, width), at(y, dy, height)) {
                        count += filled[ny * width + nx] as usize;
                    }
                }
                let touches = (-1..=1isize).any(|dy| {
                    (-1..=1isize).any(|dx| match (at(x, dx, width), at(y, dy, height)) {
                        (Some(nx), Some(ny)) => filled[ny * width + nx],
                        _ => false,
                    })
                });
                if touches {
                    frontier.push((count, y * width + x));
                }
            }
        }
        if frontier.is_empty() {
            return Err(Error::Internal("texture growth stalled".into()));
        }
        frontier.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, idx) in &frontier {
            let (x, y) = (idx % width, idx / width);
            let known: Vec<(isize, isize, f64, f32)> = offsets
                .iter()
                .filter_map(|&(dx, dy, w)| {
                    let (nx, ny) = (at(x, dx, width)?, at(y, dy, height)?);
                    filled[ny * width + nx].then(|| (dx, dy, w, out[ny * width + nx]))
                })
                .collect();
            let ssd: Vec<f64> = centers
                .par_iter()
                .map(|&(cx, cy)| {
                    known
                        .iter()
                        .map(|&(dx, dy, w, v)| {
                            let s = seed.get((cx as isize + dx) as usize, (cy as isize + dy) as usize);
                            w * ((s - v) as f64).powi(2)
                        })
                        .sum()
                })
                .collect();
            let best = ssd.iter().copied().fold(f64::INFINITY, f64::min);
            let limit = best * (1.0 + EPSILON);
            let pool: Vec<usize> = (0..centers.len()).filter(|&i| ssd[i] <= limit).collect();
            let &pick = pool
                .choose(&mut rng)
                .ok_or_else(|| Error::Internal("no texture candidate".into()))?;
            let (cx, cy) = centers[pick];
            out[idx] = seed.get(cx, cy);
            filled[idx] = true;
            remaining -= 1;
        }
    }
    GrayImage::from_vec(width, height, out)
}

/// Smooth illumination plus grain: bilinear value noise over a coarse grid,
/// a gentle gradient and per-pixel Gaussian noise.
pub fn procedural_background(width: usize, height: usize, rng: &mut impl Rng) -> GrayImage {
    let level: f64 = rng.random_range(0.74..0.82);
    let cell = 48usize;
    let (gw, gh) = (width / cell + 2, height / cell + 2);
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-0.025..0.025)).collect();
    let (gx, gy): (f64, f64) = (rng.random_range(-0.04..0.04), rng.random_range(-0.04..0.04));
    let grain = Normal::new(0.0, 0.012).unwrap();
    let mut img = GrayImage::new(width, height, 0.0);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 / cell as f64, y as f64 / cell as f64);
            let (ix, iy) = (fx as usize, fy as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let g = |i: usize, j: usize| grid[j * gw + i];
            let smooth = g(ix, iy) * (1.0 - tx) * (1.0 - ty)
                + g(ix + 1, iy) * tx * (1.0 - ty)
                + g(ix, iy + 1) * (1.0 - tx) * ty
                + g(ix + 1, iy + 1) * tx * ty;
            let ramp = gx * (x as f64 / width as f64 - 0.5) + gy * (y as f64 / height as f64 - 0.5);
            let v = level + smooth + ramp + grain.sample(rng);
            img.set(x, y, v.clamp(0.0, 1.0) as f32);
        }
    }
    img.quantized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn constant_seed_stays_constant() {
        let seed = GrayImage::new(9, 9, 0.4);
        let out = grow_texture(&seed, 17, 15, 5, 1).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.4));
    }

    #[test]
    fn checkerboard_continues_exactly() {
        let cb = |x: usize, y: usize| if (x + y) % 2 == 0 { 0.1 } else { 0.9 };
        let seed = GrayImage::from_fn(12, 12, cb);
        let out = grow_texture(&seed, 24, 24, 5, 7).unwrap();
        let ox = (24 - 12) / 2;
        for y in 2..22 {
            for x in 2..22 {
                assert_eq!(out.get(x, y), cb(x + ox, y + ox), "({x},{y})");
            }
        }
    }

    #[test]
    fn values_come_from_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let seed = procedural_background(20, 20, &mut rng);
        let out = grow_texture(&seed, 32, 30, 7, 3).unwrap();
        let support: BTreeSet<u32> = seed.data().iter().map(|v| v.to_bits()).collect();
        assert!(out.data().iter().all(|v| support.contains(&v.to_bits())));
        assert_eq!(out, grow_texture(&seed, 32, 30, 7, 3).unwrap());
    }

    #[test]
    fn rejects_bad_window() {
        let seed = GrayImage::new(8, 8, 0.5);
        assert!(grow_texture(&seed, 10, 10, 4, 0).is_err());
        assert!(grow_texture(&seed, 10, 10, 9, 0).is_err());
        assert!(grow_texture(&seed, 6, 10, 3, 0).is_err());
    }
}
