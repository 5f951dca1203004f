//! Scene composition: dictionary pits pasted onto background crops.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::defect::{DislocationType, PerType};
use crate::dictionary::{DictEntry, Dictionary};
use crate::error::{Error, Result};
use crate::imgproc::BBox;
use crate::raster::{BinaryMask, GrayImage, LocalMask};

/// Placement attempts per instance before it is dropped under the no-overlap policy.
pub const MAX_RETRIES: usize = 100;
/// Width of the linear feather around pasted pits.
pub const FEATHER: usize = 2;
/// Clearance kept between instances when overlaps are forbidden.
pub const CLEARANCE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRange {
    pub lo: usize,
    pub hi: usize,
}

impl CountRange {
    pub const fn new(lo: usize, hi: usize) -> Self {
        CountRange { lo, hi }
    }
}

/// Named per-type count ranges.
pub fn preset_ranges(name: &str) -> Option<PerType<CountRange>> {
    match name {
        "low" => Some(PerType {
            bpd: CountRange::new(0, 20),
            ted: CountRange::new(0, 10),
            tsd: CountRange::new(0, 5),
        }),
        "high" => Some(PerType {
            bpd: CountRange::new(0, 200),
            ted: CountRange::new(0, 50),
            tsd: CountRange::new(0, 20),
        }),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    Random,
    /// All BPD instances on one straight segment, equally spaced with
    /// `spacing_jitter` (fraction of the spacing) of uniform jitter.
    LagbLine { spacing_jitter: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub ranges: PerType<CountRange>,
    pub placement: Placement,
    pub allow_overlap: bool,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 512,
            height: 512,
            ranges: preset_ranges("high").unwrap(),
            placement: Placement::Random,
            allow_overlap: true,
            seed: 32,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        for t in DislocationType::ALL {
            let r = self.ranges.get(t);
            if r.lo > r.hi {
                return Err(Error::Config(format!("{t} count range {}..{} is reversed", r.lo, r.hi)));
            }
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::Config(format!("scene {}x{} too small", self.width, self.height)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(rename = "type")]
    pub dtype: DislocationType,
    pub mask: LocalMask,
    pub bbox: BBox,
    pub center: (f64, f64),
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub image: GrayImage,
    pub instances: Vec<Instance>,
    pub background_id: String,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl SyntheticScene {
    pub fn counts(&self) -> PerType<usize> {
        let mut c = PerType::default();
        for i in &self.instances {
            *c.get_mut(i.dtype) += 1;
        }
        c
    }
}

/// Named background image available to the composer.
#[derive(Debug, Clone)]
pub struct Background {
    pub id: String,
    pub image: GrayImage,
}

/// Seed of scene `index` in a batch drawn from `master`.
pub fn scene_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.random()
}

fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize { m as usize } else { (period - 1 - m) as usize }
}

/// Random `width x height` window of `bg`, mirror-tiled when `bg` is smaller.
fn background_window(bg: &GrayImage, width: usize, height: usize, rng: &mut impl Rng) -> GrayImage {
    let x0 = if bg.width() > width { rng.random_range(0..=bg.width() - width) } else { 0 };
    let y0 = if bg.height() > height { rng.random_range(0..=bg.height() - height) } else { 0 };
    GrayImage::from_fn(width, height, |x, y| {
        bg.get(reflect((x + x0) as isize, bg.width()), reflect((y + y0) as isize, bg.height()))
    })
}

/// Pit image and mask ready to paste, with the right-angle rotation applied.
fn oriented(entry: &DictEntry, rng: &mut impl Rng) -> (GrayImage, BinaryMask) {
    if entry.dtype == DislocationType::Bpd {
        return (entry.image.clone(), entry.mask.clone());
    }
    let k = rng.random_range(0..4);
    let (mut img, mut mask) = (entry.image.rotate90_times(k), entry.mask.rotate90_times(k));
    if rng.random_bool(0.5) {
        img = img.flip_horizontal();
        mask = mask.flip_horizontal();
    }
    (img, mask)
}

/// Chebyshev distance to the mask, capped at `cap + 1`.
fn distance_to_mask(mask: &BinaryMask, cap: usize) -> Vec<usize> {
    let (w, h) = (mask.width(), mask.height());
    let mut d = vec![cap + 1; w * h];
    for (x, y) in mask.points() {
        let (x, y) = (x as usize, y as usize);
        for yy in y.saturating_sub(cap)..=(y + cap).min(h - 1) {
            for xx in x.saturating_sub(cap)..=(x + cap).min(w - 1) {
                let r = x.abs_diff(xx).max(y.abs_diff(yy));
                let cell = &mut d[yy * w + xx];
                *cell = (*cell).min(r);
            }
        }
    }
    d
}

/// Min-blend with a feathered border: mask pixels take `min(scene, pit)`,
/// pixels within [`FEATHER`] of the mask are blended toward it linearly.
fn paste(scene: &mut GrayImage, img: &GrayImage, mask: &BinaryMask, x0: usize, y0: usize) {
    let dist = distance_to_mask(mask, FEATHER);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let d = dist[y * img.width() + x];
            if d > FEATHER {
                continue;
            }
            let alpha = 1.0 - d as f32 / (FEATHER + 1) as f32;
            let (sx, sy) = (x + x0, y + y0);
            let bg = scene.get(sx, sy);
            let v = alpha * img.get(x, y) + (1.0 - alpha) * bg;
            scene.set(sx, sy, v.min(bg));
        }
    }
}

fn fits(spec: &SceneSpec, w: usize, h: usize) -> bool {
    w <= spec.width && h <= spec.height
}

/// Composes one scene. Counts are drawn uniformly per type; each instance is
/// a uniformly drawn dictionary pit (round types randomly rotated/flipped,
/// BPDs kept in their orientation) pasted at a uniform position.
pub fn compose_scene(spec: &SceneSpec, dict: &Dictionary, backgrounds: &[Background]) -> Result<SyntheticScene> {
    spec.validate()?;
    if backgrounds.is_empty() {
        return Err(Error::Config("no background images".into()));
    }
    let pools = PerType::from_fn(|t| dict.of_type(t));
    for t in DislocationType::ALL {
        if spec.ranges.get(t).hi > 0 && pools.get(t).is_empty() {
            return Err(Error::Config(format!("dictionary has no {t} patches")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bg = backgrounds.choose(&mut rng).expect("nonempty");
    let mut image = background_window(&bg.image, spec.width, spec.height, &mut rng);
    let counts = PerType::from_fn(|t| {
        let r = spec.ranges.get(t);
        rng.random_range(r.lo..=r.hi)
    });

    let mut instances: Vec<Instance> = Vec::new();
    let mut keepout: Vec<LocalMask> = Vec::new();
    let mut warnings = Vec::new();

    // LAGB segment: start point, direction and spacing drawn up front
    let line = match spec.placement {
        Placement::LagbLine { spacing_jitter } if counts.bpd > 0 => {
            let phi: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let spacing: f64 = rng.random_range(28.0..40.0);
            let length = spacing * (counts.bpd.saturating_sub(1)) as f64;
            let (cx, cy) = (spec.width as f64 / 2.0, spec.height as f64 / 2.0);
            let start = (cx - phi.cos() * length / 2.0, cy - phi.sin() * length / 2.0);
            Some((start, phi, spacing, spacing_jitter))
        }
        _ => None,
    };

    for t in DislocationType::ALL {
        for k in 0..*counts.get(t) {
            let entry = *pools.get(t).choose(&mut rng).expect("checked nonempty");
            let (img, mask) = oriented(entry, &mut rng);
            let (pw, ph) = (img.width(), img.height());
            if !fits(spec, pw, ph) {
                return Err(Error::Config(format!("patch {} larger than the scene", entry.id)));
            }
            let on_line = t == DislocationType::Bpd && line.is_some();
            let mut placed = None;
            for _ in 0..MAX_RETRIES {
                let (x0, y0) = if let (true, Some((start, phi, spacing, jitter))) = (on_line, line) {
                    let s = spacing * (k as f64 + jitter * rng.random_range(-0.5..0.5));
                    let (cx, cy) = (start.0 + s * phi.cos(), start.1 + s * phi.sin());
                    let x0 = (cx - pw as f64 / 2.0).round().clamp(0.0, (spec.width - pw) as f64) as usize;
                    let y0 = (cy - ph as f64 / 2.0).round().clamp(0.0, (spec.height - ph) as f64) as usize;
                    (x0, y0)
                } else {
                    (rng.random_range(0..=spec.width - pw), rng.random_range(0..=spec.height - ph))
                };
                let local = LocalMask::from_mask(x0, y0, &mask);
                if !spec.allow_overlap {
                    let grown = local.dilated(CLEARANCE);
                    if keepout.iter().any(|o| o.intersects(&grown)) {
                        continue;
                    }
                }
                placed = Some((x0, y0, local));
                break;
            }
            let Some((x0, y0, local)) = placed else {
                warnings.push(format!("dropped one {t}: no free position after {MAX_RETRIES} tries"));
                log::warn!("scene seed {}: dropped one {t} after {MAX_RETRIES} placement attempts", spec.seed);
                continue;
            };
            paste(&mut image, &img, &mask, x0, y0);
            let (bx0, by0, bx1, by1) = local.bbox().expect("pit mask nonempty");
            let center = local.centroid().expect("pit mask nonempty");
            keepout.push(local.clone());
            instances.push(Instance {
                dtype: t,
                mask: local,
                bbox: BBox {
                    x0: bx0,
                    y0: by0,
                    x1: bx1,
                    y1: by1,
                },
                center,
                source_id: entry.id.clone(),
            });
        }
    }
    Ok(SyntheticScene {
        image: image.quantized(),
        instances,
        background_id: bg.id.clone(),
        seed: spec.seed,
        warnings,
    })
}

/// `n` scenes with per-scene seeds from [`scene_seed`], composed in parallel.
pub fn compose_batch(spec: &SceneSpec, n: usize, dict: &Dictionary, backgrounds: &[Background]) -> Result<Vec<SyntheticScene>> {
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let s = SceneSpec {
                seed: scene_seed(spec.seed, i as u64),
                ..spec.clone()
            };
            compose_scene(&s, dict, backgrounds)
        })
        .collect()
}
