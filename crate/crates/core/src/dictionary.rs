//! Curated single-pit patches labelled by dislocation type.
//!
//! On disk: one folder per type holding `<id>.png` and `<id>_mask.png`, plus
//! `manifest.json` listing every entry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::defect::{DislocationType, PerType};
use crate::error::{Error, Result};
use crate::imgproc::{descriptors, fit_ellipse, Blob, Patch, ShapeDescriptors, BBox};
use crate::raster::{BinaryMask, GrayImage};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct DictEntry {
    pub id: String,
    pub dtype: DislocationType,
    pub image: GrayImage,
    /// Pit pixels in patch coordinates.
    pub mask: BinaryMask,
    /// Tile or generator the patch came from.
    pub source: String,
}

impl DictEntry {
    pub fn descriptors(&self) -> Option<ShapeDescriptors> {
        let blob = Blob::from_mask(&self.mask)?;
        fit_ellipse(&blob).ok().map(|f| descriptors(&blob, &f))
    }

    /// View as an extracted patch anchored at the origin.
    pub fn as_patch(&self) -> Patch {
        Patch {
            image: self.image.clone(),
            mask: self.mask.clone(),
            origin: (0, 0),
            region: BBox {
                x0: 0,
                y0: 0,
                x1: self.image.width() - 1,
                y1: self.image.height() - 1,
            },
            border: 0,
            clipped: false,
            blob_index: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    #[serde(rename = "type")]
    dtype: DislocationType,
    image: String,
    mask: String,
    source: String,
    descriptors: Option<ShapeDescriptors>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dictionary {
    pub entries: Vec<DictEntry>,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn of_type(&self, t: DislocationType) -> Vec<&DictEntry> {
        self.entries.iter().filter(|e| e.dtype == t).collect()
    }

    pub fn counts(&self) -> PerType<usize> {
        let mut c = PerType::default();
        for e in &self.entries {
            *c.get_mut(e.dtype) += 1;
        }
        c
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let mut manifest = Vec::with_capacity(self.len());
        for t in DislocationType::ALL {
            let sub = dir.join(t.name());
            std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        }
        for e in &self.entries {
            let image = format!("{}/{}.png", e.dtype.name(), e.id);
            let mask = format!("{}/{}_mask.png", e.dtype.name(), e.id);
            e.image.save_png(dir.join(&image))?;
            e.mask.save_png(dir.join(&mask))?;
            manifest.push(ManifestEntry {
                id: e.id.clone(),
                dtype: e.dtype,
                image,
                mask,
                source: e.source.clone(),
                descriptors: e.descriptors(),
            });
        }
        let path = dir.join(MANIFEST);
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Dictionary> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| Error::file(&path, e))?;
        let mut entries = Vec::with_capacity(manifest.len());
        for m in manifest {
            let image = GrayImage::load(dir.join(&m.image))?;
            let mask = BinaryMask::load(dir.join(&m.mask))?;
            if (image.width(), image.height()) != (mask.width(), mask.height()) {
                return Err(Error::file(dir.join(&m.mask), "mask size differs from its patch"));
            }
            entries.push(DictEntry {
                id: m.id,
                dtype: m.dtype,
                image,
                mask,
                source: m.source,
            });
        }
        Ok(Dictionary { entries })
    }
}
