//! Stage directories, the files each stage hands to the next, and small IO
//! helpers shared by the subcommands.

use std::path::{Path, PathBuf};

use pitmap_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::PipelineConfig;

pub const CONFIG_SNAPSHOT: &str = "config.toml";

/// A file some stage writes, with the subcommand that produces it.
#[derive(Debug, Clone, Copy)]
pub struct Artifact {
    pub stage: &'static str,
    pub file: &'static str,
}

pub const CANDIDATES: Artifact = Artifact { stage: "extract", file: "candidates.jsonl" };
pub const PATCHES: Artifact = Artifact { stage: "extract", file: "patches" };
pub const GATE_CSV: Artifact = Artifact { stage: "gate", file: "gate.csv" };
pub const QUALITY_MODEL: Artifact = Artifact { stage: "gate", file: "quality_model.json" };
pub const CROSSVAL: Artifact = Artifact { stage: "gate", file: "crossval.json" };
pub const FEATURES: Artifact = Artifact { stage: "features", file: "features.fvec" };
pub const SCALER: Artifact = Artifact { stage: "features", file: "scaler.json" };
pub const EMBEDDING: Artifact = Artifact { stage: "embed", file: "embedding.csv" };
pub const LABELS: Artifact = Artifact { stage: "cluster", file: "labels.csv" };
pub const TYPES: Artifact = Artifact { stage: "cluster", file: "types.json" };
pub const SYNTH_MANIFEST: Artifact = Artifact { stage: "synth", file: "synth_manifest.json" };
pub const SYNTH_TILES: Artifact = Artifact { stage: "synth", file: "tiles.json" };
pub const SYNTH_ANNOTATIONS: Artifact = Artifact { stage: "synth", file: "annotations.json" };
pub const DETECTOR: Artifact = Artifact { stage: "detect", file: "detector.json" };
pub const DETECTIONS: Artifact = Artifact { stage: "detect", file: "detections.json" };
pub const UNCLASSIFIED: Artifact = Artifact { stage: "detect", file: "unclassified.json" };
pub const REJECTIONS: Artifact = Artifact { stage: "detect", file: "rejections.json" };
pub const RADII: Artifact = Artifact { stage: "detect", file: "radii.csv" };
pub const RMSE: Artifact = Artifact { stage: "eval", file: "rmse.json" };
pub const ERRORS: Artifact = Artifact { stage: "eval", file: "errors.csv" };
pub const PARTS: Artifact = Artifact { stage: "density", file: "parts.csv" };
pub const DEDUP: Artifact = Artifact { stage: "density", file: "dedup.json" };

impl Artifact {
    pub fn path(&self, cfg: &PipelineConfig) -> PathBuf {
        cfg.paths.work.join(self.stage).join(self.file)
    }

    /// The path, or a data error telling which subcommand to run first.
    pub fn require(&self, cfg: &PipelineConfig) -> Result<PathBuf> {
        let p = self.path(cfg);
        if p.exists() {
            Ok(p)
        } else {
            Err(missing(&p, self.stage))
        }
    }
}

pub fn missing(path: &Path, stage: &str) -> Error {
    Error::file(path, format!("not found; run `pitmap {stage}` first"))
}

pub fn stage_dir(cfg: &PipelineConfig, stage: &str) -> PathBuf {
    cfg.paths.work.join(stage)
}

/// Empties the stage directory and records the resolved configuration in it.
pub fn fresh_stage(cfg: &PipelineConfig, stage: &str) -> Result<PathBuf> {
    let dir = stage_dir(cfg, stage);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_text(dir.join(CONFIG_SNAPSHOT), &cfg.to_toml())?;
    Ok(dir)
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    write_text(path, &json)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::file(path, e))
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Internal(e.to_string()))?);
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::file(path, format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::file(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::file(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::file(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::file(path, e))
}

/// Resolves `rel` against the directory holding `anchor`.
pub fn beside(anchor: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        anchor.parent().unwrap_or(Path::new(".")).join(p)
    }
}
