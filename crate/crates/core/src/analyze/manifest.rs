use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wafer sections used for per-part counts.
pub const PARTS: usize = 20;
/// Assumed pixel size when none is configured.
pub const DEFAULT_PIXEL_SIZE_UM: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileRecord {
    pub tile_id: String,
    pub image: String,
    pub column: usize,
    pub row: usize,
    /// Wafer section, 1..=20.
    pub part: usize,
    /// Pixels shared with each neighbouring tile.
    #[serde(default)]
    pub overlap_px: usize,
    pub width: usize,
    pub height: usize,
    /// Numeric id used by COCO-style prediction files; defaults to the
    /// 1-based position in the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_id: Option<u64>,
}

impl TileRecord {
    /// Wafer pixel coordinates of the tile's top-left corner.
    pub fn origin(&self) -> (f64, f64) {
        (
            (self.column * (self.width - self.overlap_px)) as f64,
            (self.row * (self.height - self.overlap_px)) as f64,
        )
    }

    pub fn center(&self) -> (f64, f64) {
        let (x, y) = self.origin();
        (x + (self.width as f64 - 1.0) / 2.0, y + (self.height as f64 - 1.0) / 2.0)
    }

    pub fn to_wafer(&self, p: (f64, f64)) -> (f64, f64) {
        let o = self.origin();
        (o.0 + p.0, o.1 + p.1)
    }

    pub fn to_tile(&self, p: (f64, f64)) -> (f64, f64) {
        let o = self.origin();
        (p.0 - o.0, p.1 - o.1)
    }

    /// Whether a wafer point lies on this tile's pixel grid.
    pub fn covers(&self, p: (f64, f64)) -> bool {
        let (x, y) = self.to_tile(p);
        x >= -0.5 && y >= -0.5 && x < self.width as f64 - 0.5 && y < self.height as f64 - 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileManifest {
    #[serde(default = "default_pixel_size")]
    pub pixel_size_um: f64,
    #[serde(default)]
    pub magnification: String,
    pub tiles: Vec<TileRecord>,
}

fn default_pixel_size() -> f64 {
    DEFAULT_PIXEL_SIZE_UM
}

impl TileManifest {
    pub fn new(tiles: Vec<TileRecord>, pixel_size_um: f64) -> Result<Self> {
        let m = TileManifest {
            pixel_size_um,
            magnification: String::new(),
            tiles,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_size_um > 0.0) {
            return Err(Error::Config(format!("pixel size {} must be positive", self.pixel_size_um)));
        }
        let mut cells = HashSet::new();
        let mut ids = HashSet::new();
        for t in &self.tiles {
            if !cells.insert((t.column, t.row)) {
                return Err(Error::InvalidInput(format!("grid cell ({}, {}) listed twice", t.column, t.row)));
            }
            if !ids.insert(&t.tile_id) {
                return Err(Error::InvalidInput(format!("tile id {} listed twice", t.tile_id)));
            }
            if !(1..=PARTS).contains(&t.part) {
                return Err(Error::InvalidInput(format!("tile {}: part {} outside 1..={PARTS}", t.tile_id, t.part)));
            }
            if t.overlap_px >= t.width.min(t.height) {
                return Err(Error::InvalidInput(format!("tile {}: overlap exceeds tile size", t.tile_id)));
            }
        }
        Ok(())
    }

    pub fn tile(&self, id: &str) -> Option<&TileRecord> {
        self.tiles.iter().find(|t| t.tile_id == id)
    }

    pub fn image_id(&self, index: usize) -> u64 {
        self.tiles[index].image_id.unwrap_or(index as u64 + 1)
    }

    /// Wafer extent in pixels.
    pub fn extent(&self) -> (f64, f64) {
        self.tiles.iter().fold((0.0, 0.0), |acc, t| {
            let o = t.origin();
            (acc.0.max(o.0 + t.width as f64), acc.1.max(o.1 + t.height as f64))
        })
    }

    /// Reads JSON (`{pixel_size_um, magnification, tiles: [...]}`) or, for a
    /// `.csv` path, tile rows with the [`TileRecord`] columns.
    pub fn load(path: impl AsRef<Path>, pixel_size_um: Option<f64>) -> Result<Self> {
        let path = path.as_ref();
        let mut m = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::file(path, e))?;
            let tiles = rdr
                .deserialize()
                .collect::<std::result::Result<Vec<TileRecord>, _>>()
                .map_err(|e| Error::file(path, e))?;
            TileManifest {
                pixel_size_um: DEFAULT_PIXEL_SIZE_UM,
                magnification: String::new(),
                tiles,
            }
        } else {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::file(path, e))?
        };
        if let Some(p) = pixel_size_um {
            m.pixel_size_um = p;
        }
        m.validate().map_err(|e| Error::file(path, e))?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
pub(crate) fn grid(cols: usize, rows: usize, size: usize, overlap: usize) -> TileManifest {
    let tiles = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c, r)))
        .map(|(c, r)| TileRecord {
            tile_id: format!("t{c}_{r}"),
            image: format!("t{c}_{r}.png"),
            column: c,
            row: r,
            part: (r * cols + c) % PARTS + 1,
            overlap_px: overlap,
            width: size,
            height: size,
            image_id: None,
        })
        .collect();
    TileManifest::new(tiles, 1.0).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_round_trip() {
        let m = grid(3, 2, 100, 10);
        let t = m.tile("t2_1").unwrap();
        assert_eq!(t.origin(), (180.0, 90.0));
        let p = (12.5, 40.25);
        assert_eq!(t.to_tile(t.to_wafer(p)), p);
        assert_eq!(m.extent(), (280.0, 190.0));
    }

    #[test]
    fn rejects_duplicate_cells_and_bad_parts() {
        let mut m = grid(2, 1, 50, 0);
        m.tiles[1].column = 0;
        assert!(m.validate().is_err());
        let mut m = grid(2, 1, 50, 0);
        m.tiles[0].part = 21;
        assert!(m.validate().is_err());
    }

    #[test]
    fn csv_and_json_load() {
        let m = grid(2, 2, 64, 4);
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("m.json");
        m.save(&json).unwrap();
        assert_eq!(TileManifest::load(&json, None).unwrap(), m);
        let csv = dir.path().join("m.csv");
        let mut w = csv::Writer::from_path(&csv).unwrap();
        for t in &m.tiles {
            w.serialize(t).unwrap();
        }
        w.flush().unwrap();
        let back = TileManifest::load(&csv, Some(1.0)).unwrap();
        assert_eq!(back.tiles, m.tiles);
    }
}
