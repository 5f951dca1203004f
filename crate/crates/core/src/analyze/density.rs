use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::detect::Detection;
use super::manifest::{TileManifest, PARTS};
use crate::defect::{DislocationType, PerType};
use crate::error::{Error, Result};

/// Square centimetres per square micrometre.
const CM2_PER_UM2: f64 = 1e-8;
/// Detections of one type from different tiles closer than this (wafer
/// pixels) are treated as one pit seen twice.
pub const DEFAULT_DEDUP_RADIUS_PX: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMap {
    #[serde(rename = "type")]
    pub dtype: DislocationType,
    pub bin_um: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major counts; bin `(0, 0)` starts at the wafer origin.
    pub counts: Vec<u64>,
}

impl DensityMap {
    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.nx + ix]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Pits per square centimetre in one bin.
    pub fn density(&self, ix: usize, iy: usize) -> f64 {
        self.count(ix, iy) as f64 / (self.bin_um * self.bin_um * CM2_PER_UM2)
    }

    pub fn max_density(&self) -> f64 {
        self.counts.iter().copied().max().unwrap_or(0) as f64 / (self.bin_um * self.bin_um * CM2_PER_UM2)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| Error::file(path, e))?;
        for iy in 0..self.ny {
            let row: Vec<String> = (0..self.nx).map(|ix| format!("{}", self.density(ix, iy))).collect();
            w.write_record(&row).map_err(|e| Error::file(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Heat map, black through red and yellow to white, each bin drawn as a
    /// `scale x scale` block.
    pub fn save_png(&self, path: impl AsRef<Path>, scale: u32) -> Result<()> {
        let path = path.as_ref();
        let scale = scale.max(1);
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let img = image::RgbImage::from_fn(self.nx as u32 * scale, self.ny as u32 * scale, |x, y| {
            let t = self.count((x / scale) as usize, (y / scale) as usize) as f64 / max;
            let ch = |lo: f64| ((t * 3.0 - lo).clamp(0.0, 1.0) * 255.0).round() as u8;
            image::Rgb([ch(0.0), ch(1.0), ch(2.0)])
        });
        img.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::file(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutOfBounds {
    pub index: usize,
    pub tile_id: String,
    pub reason: String,
}

/// Outcome of overlap suppression.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dedup {
    /// Indices of surviving detections, ascending.
    pub kept: Vec<usize>,
    pub removed: usize,
    pub out_of_bounds: Vec<OutOfBounds>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Wafer pixel position of every locatable detection.
fn wafer_points(dets: &[Detection], manifest: &TileManifest) -> (Vec<Option<(f64, f64)>>, Vec<OutOfBounds>) {
    let by_id: HashMap<&str, usize> = manifest.tiles.iter().enumerate().map(|(i, t)| (t.tile_id.as_str(), i)).collect();
    let mut oob = Vec::new();
    let pts = dets
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let Some(&ti) = by_id.get(d.tile_id.as_str()) else {
                oob.push(OutOfBounds { index: i, tile_id: d.tile_id.clone(), reason: "tile not in manifest".into() });
                return None;
            };
            let t = &manifest.tiles[ti];
            let p = t.to_wafer(d.center);
            if !t.covers(p) {
                oob.push(OutOfBounds { index: i, tile_id: d.tile_id.clone(), reason: "centre outside its tile".into() });
                return None;
            }
            Some(p)
        })
        .collect();
    (pts, oob)
}

/// Groups same-type detections from different tiles within `radius_px` of
/// each other; each group keeps only the detections of the tile whose centre
/// is nearest to one of its members.
pub fn dedup_overlaps(dets: &[Detection], manifest: &TileManifest, radius_px: f64) -> Dedup {
    let (pts, out_of_bounds) = wafer_points(dets, manifest);
    let n = dets.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let cell = radius_px.max(1e-9);
    let mut grid: HashMap<(i64, i64, DislocationType), Vec<usize>> = HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        if let Some(p) = p {
            let key = ((p.0 / cell).floor() as i64, (p.1 / cell).floor() as i64, dets[i].dtype);
            grid.entry(key).or_default().push(i);
        }
    }
    for (i, p) in pts.iter().enumerate() {
        let Some(p) = p else { continue };
        let (cx, cy) = ((p.0 / cell).floor() as i64, (p.1 / cell).floor() as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let Some(list) = grid.get(&(cx + dx, cy + dy, dets[i].dtype)) else { continue };
                for &j in list {
                    if j <= i || dets[j].tile_id == dets[i].tile_id {
                        continue;
                    }
                    let q = pts[j].expect("gridded");
                    if (p.0 - q.0).hypot(p.1 - q.1) <= radius_px {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        if pts[i].is_some() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
    }
    let mut kept = Vec::new();
    let mut removed = 0;
    for members in groups.values() {
        let owner = members
            .iter()
            .map(|&i| {
                let t = manifest.tile(&dets[i].tile_id).expect("located");
                let (c, p) = (t.center(), pts[i].expect("located"));
                ((c.0 - p.0).hypot(c.1 - p.1), (t.row, t.column), i)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, _, i)| dets[i].tile_id.as_str())
            .expect("nonempty group");
        for &i in members {
            if dets[i].tile_id == owner {
                kept.push(i);
            } else {
                removed += 1;
            }
        }
    }
    kept.sort_unstable();
    Dedup { kept, removed, out_of_bounds }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityResult {
    pub maps: PerType<DensityMap>,
    pub dedup: Dedup,
}

/// Per-type wafer histograms of deduplicated detection centres with square
/// bins of `bin_um` micrometres.
pub fn density_map(dets: &[Detection], manifest: &TileManifest, bin_um: f64, dedup_radius_px: f64) -> Result<DensityResult> {
    manifest.validate()?;
    if !(bin_um > 0.0) {
        return Err(Error::Config(format!("bin size {bin_um} must be positive")));
    }
    let px = manifest.pixel_size_um;
    let (w, h) = manifest.extent();
    let nx = ((w * px / bin_um).ceil() as usize).max(1);
    let ny = ((h * px / bin_um).ceil() as usize).max(1);
    let dedup = dedup_overlaps(dets, manifest, dedup_radius_px);
    let mut maps = PerType::from_fn(|t| DensityMap { dtype: t, bin_um, nx, ny, counts: vec![0; nx * ny] });
    for &i in &dedup.kept {
        let d = &dets[i];
        let t = manifest.tile(&d.tile_id).expect("kept detections are located");
        let p = t.to_wafer(d.center);
        let ix = ((p.0.max(0.0) * px / bin_um) as usize).min(nx - 1);
        let iy = ((p.1.max(0.0) * px / bin_um) as usize).min(ny - 1);
        maps.get_mut(d.dtype).counts[iy * nx + ix] += 1;
    }
    Ok(DensityResult { maps, dedup })
}

/// Detections per wafer part and type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartCounts {
    /// Index 0 is part 1.
    pub parts: Vec<PerType<u64>>,
    /// Detections whose tile is not in the manifest.
    pub unplaced: usize,
}

impl PartCounts {
    pub fn row_total(&self, part: usize) -> u64 {
        let r = &self.parts[part - 1];
        r.bpd + r.ted + r.tsd
    }

    /// Type with strictly the most detections in `part`, if any.
    pub fn dominant(&self, part: usize) -> Option<DislocationType> {
        let r = &self.parts[part - 1];
        let best = DislocationType::ALL.iter().copied().max_by_key(|&t| *r.get(t))?;
        let top = *r.get(best);
        let ties = DislocationType::ALL.iter().filter(|&&t| *r.get(t) == top).count();
        (top > 0 && ties == 1).then_some(best)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::file(path, e))?;
        w.write_record(["part", "BPD", "TED", "TSD", "total", "dominant"]).map_err(|e| Error::file(path, e))?;
        for p in 1..=PARTS {
            let r = &self.parts[p - 1];
            let dom = self.dominant(p).map(|t| t.name()).unwrap_or("");
            w.write_record([
                p.to_string(),
                r.bpd.to_string(),
                r.ted.to_string(),
                r.tsd.to_string(),
                self.row_total(p).to_string(),
                dom.to_string(),
            ])
            .map_err(|e| Error::file(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn part_counts(dets: &[Detection], manifest: &TileManifest) -> PartCounts {
    let mut parts = vec![PerType::<u64>::default(); PARTS];
    let mut unplaced = 0;
    for d in dets {
        match manifest.tile(&d.tile_id) {
            Some(t) => *parts[t.part - 1].get_mut(d.dtype) += 1,
            None => unplaced += 1,
        }
    }
    PartCounts { parts, unplaced }
}
