//! The `synth` subcommand: backgrounds, scene composition and export.

use pitmap_core::analyze::{TileManifest, TileRecord, PARTS};
use pitmap_core::dictionary::Dictionary;
use pitmap_core::synth::{
    compose_batch, export_dataset, grow_texture, procedural_background, synthetic_dictionary, Background, SceneSpec,
};
use pitmap_core::{DislocationType, Error, GrayImage, PerType, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::*;
use crate::config::{BackgroundSource, PipelineConfig};
use crate::seeds;

/// Command-line adjustments to the synth section.
#[derive(Debug, Clone, Default)]
pub struct SynthFlags {
    pub n: Option<usize>,
    pub ranges: Option<String>,
    pub clean: bool,
}

impl SynthFlags {
    pub fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        if let Some(n) = self.n {
            cfg.synth.scenes = n;
        }
        if let Some(r) = &self.ranges {
            cfg.synth.preset = r.clone();
        }
        if self.clean {
            cfg.synth.allow_overlap = false;
        }
        cfg.validate()
    }
}

/// The dictionary used by `synth` and `detect`: rendered pits when
/// configured, otherwise the folder written by `dict`.
pub fn resolve_dictionary(cfg: &PipelineConfig) -> Result<Dictionary> {
    if cfg.synth.rendered_dictionary {
        let mut rng = seeds::rng(cfg.seed, seeds::DICTIONARY);
        return Ok(synthetic_dictionary(cfg.synth.rendered_per_type, &mut rng));
    }
    let dir = cfg.dictionary_dir();
    if !dir.join(pitmap_core::dictionary::MANIFEST).exists() {
        return Err(missing(&dir, "dict"));
    }
    Dictionary::load(&dir)
}

fn backgrounds(cfg: &PipelineConfig) -> Result<Vec<Background>> {
    let s = &cfg.synth;
    let side = s.background_side;
    if side < s.width || side < s.height {
        return Err(Error::Config(format!(
            "synth.background_side {side} is smaller than the {}x{} scene",
            s.width, s.height
        )));
    }
    let mut rng = seeds::rng(cfg.seed, seeds::BACKGROUNDS);
    let bg_seeds: Vec<u64> = (0..s.background_count.max(1)).map(|_| rng.random()).collect();
    let images: Vec<GrayImage> = match s.backgrounds {
        BackgroundSource::Procedural => bg_seeds
            .par_iter()
            .map(|&sd| procedural_background(side, side, &mut seeds::rng(sd, 0)))
            .collect(),
        BackgroundSource::Grown => {
            let path = s
                .texture_seed
                .as_ref()
                .ok_or_else(|| Error::Config("synth.backgrounds = \"grown\" needs synth.texture_seed".into()))?;
            let seed_img = GrayImage::load(path)?;
            bg_seeds
                .par_iter()
                .map(|&sd| grow_texture(&seed_img, side, side, s.texture_window, sd).map(|g| g.quantized()))
                .collect::<Result<_>>()?
        }
    };
    Ok(images
        .into_iter()
        .enumerate()
        .map(|(i, image)| Background { id: format!("bg{i}"), image })
        .collect())
}

#[derive(Serialize)]
struct SceneEntry {
    file: String,
    seed: u64,
    background: String,
    counts: PerType<usize>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct SynthManifest {
    master_seed: u64,
    spec: SceneSpec,
    dictionary: PerType<usize>,
    scenes: Vec<SceneEntry>,
}

pub fn synth(cfg: &PipelineConfig) -> Result<()> {
    let s = &cfg.synth;
    if s.scenes == 0 {
        return Err(Error::Config("synth.scenes must be at least 1".into()));
    }
    let dict = resolve_dictionary(cfg)?;
    let spec = SceneSpec {
        width: s.width,
        height: s.height,
        ranges: s.resolved_ranges()?,
        placement: s.placement,
        allow_overlap: s.allow_overlap,
        seed: cfg.seed,
    };
    spec.validate()?;
    for t in DislocationType::ALL {
        if spec.ranges.get(t).hi > 0 && dict.of_type(t).is_empty() {
            return Err(Error::InvalidInput(format!("dictionary has no {t} patches but the {t} range allows some")));
        }
    }
    let bgs = backgrounds(cfg)?;
    let dir = fresh_stage(cfg, "synth")?;
    let scenes = compose_batch(&spec, s.scenes, &dict, &bgs)?;
    let coco = export_dataset(&scenes, &dir)?;
    let mut dropped = 0;
    let entries: Vec<SceneEntry> = scenes
        .iter()
        .zip(&coco.images)
        .map(|(sc, im)| {
            dropped += sc.warnings.len();
            SceneEntry {
                file: im.file_name.clone(),
                seed: sc.seed,
                background: sc.background_id.clone(),
                counts: sc.counts(),
                warnings: sc.warnings.clone(),
            }
        })
        .collect();
    if dropped > 0 {
        log::warn!("synth: {dropped} placement warnings (see {})", SYNTH_MANIFEST.file);
    }
    write_json(
        dir.join(SYNTH_MANIFEST.file),
        &SynthManifest {
            master_seed: cfg.seed,
            spec,
            dictionary: dict.counts(),
            scenes: entries,
        },
    )?;
    // Scenes laid out on a grid so they can be analyzed as wafer tiles.
    let cols = (s.scenes as f64).sqrt().ceil() as usize;
    let tiles = coco
        .images
        .iter()
        .enumerate()
        .map(|(i, im)| TileRecord {
            tile_id: pitmap_core::analyze::coco_tile_id(&im.file_name),
            image: format!("images/{}", im.file_name),
            column: i % cols,
            row: i / cols,
            part: i % PARTS + 1,
            overlap_px: 0,
            width: im.width,
            height: im.height,
            image_id: Some(im.id),
        })
        .collect();
    let pixel = cfg.analyze.pixel_size_um.unwrap_or(pitmap_core::analyze::DEFAULT_PIXEL_SIZE_UM);
    TileManifest::new(tiles, pixel)?.save(dir.join(SYNTH_TILES.file))?;
    log::info!("synth: {} scenes, {} instances", scenes.len(), coco.annotations.len());
    Ok(())
}
