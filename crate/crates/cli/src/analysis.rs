//! Wafer analysis: detect, eval, density, report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pitmap_core::analyze::{
    burgers_radius, count_by_tile, density_map, detect_tile, evaluate, frames_from_coco, frames_from_manifest,
    ingest_annotations, ingest_predictions, part_counts, Counts, Detection, DetectionSource, DetectorModel, RmseReport,
    TileDetections, Unclassified,
};
use pitmap_core::quality::QualityModel;
use pitmap_core::synth::read_coco;
use pitmap_core::{DislocationType, Error, PerType, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::*;
use crate::config::PipelineConfig;
use crate::discover::{load_tile, tile_manifest};
use crate::plot;
use crate::synthesize::resolve_dictionary;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TileUnclassified {
    tile_id: String,
    candidates: Vec<Unclassified>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RadiusRow {
    tile_id: String,
    index: usize,
    #[serde(rename = "type")]
    dtype: DislocationType,
    area_px: usize,
    radius_px: f64,
    radius_um: f64,
    class: String,
}

fn detection_gate(cfg: &PipelineConfig) -> Result<Option<QualityModel<f64>>> {
    if !cfg.quality.gate_detections {
        return Ok(None);
    }
    let path = match &cfg.quality.model {
        Some(p) => p.clone(),
        None => QUALITY_MODEL.require(cfg)?,
    };
    QualityModel::load(path).map(Some)
}

pub fn detect(cfg: &PipelineConfig) -> Result<()> {
    let (mpath, manifest) = tile_manifest(cfg)?;
    let dir = fresh_stage(cfg, "detect")?;
    let detections: Vec<Detection> = match &cfg.analyze.predictions {
        Some(p) => {
            let report = ingest_predictions(p, &frames_from_manifest(&manifest))?;
            if !report.rejections.is_empty() || report.duplicates > 0 {
                log::warn!(
                    "detect: {} records rejected, {} duplicates dropped",
                    report.rejections.len(),
                    report.duplicates
                );
            }
            write_json(
                dir.join(REJECTIONS.file),
                &serde_json::json!({ "rejections": report.rejections, "duplicates": report.duplicates }),
            )?;
            report.detections
        }
        None => {
            let dict = resolve_dictionary(cfg)?;
            let model = DetectorModel::<f64>::from_dictionary(&dict, cfg.imgproc.clone(), &cfg.embed.reducer(cfg.seed))?
                .with_quality(detection_gate(cfg)?);
            model.save(dir.join(DETECTOR.file))?;
            let per_tile: Vec<TileDetections> = manifest
                .tiles
                .par_iter()
                .map(|rec| load_tile(&mpath, rec).and_then(|img| detect_tile(&rec.tile_id, &img, &model)))
                .collect::<Result<_>>()?;
            let unclassified: Vec<TileUnclassified> = manifest
                .tiles
                .iter()
                .zip(&per_tile)
                .map(|(rec, d)| TileUnclassified {
                    tile_id: rec.tile_id.clone(),
                    candidates: d.unclassified.clone(),
                })
                .collect();
            write_json(dir.join(UNCLASSIFIED.file), &unclassified)?;
            per_tile.into_iter().flat_map(|d| d.detections).collect()
        }
    };
    let pixel = manifest.pixel_size_um;
    let radii = detections
        .iter()
        .enumerate()
        .filter(|(_, d)| d.area() > 0)
        .map(|(i, d)| -> Result<RadiusRow> {
            let r = burgers_radius(d.area(), pixel, &cfg.analyze.size_classes)?;
            Ok(RadiusRow {
                tile_id: d.tile_id.clone(),
                index: i,
                dtype: d.dtype,
                area_px: d.area(),
                radius_px: r.radius_px,
                radius_um: r.radius_um,
                class: r.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(dir.join(RADII.file), &radii)?;
    log::info!("detect: {} detections over {} tiles", detections.len(), manifest.tiles.len());
    write_json(dir.join(DETECTIONS.file), &detections)
}

fn truth_path(cfg: &PipelineConfig) -> Result<PathBuf> {
    match &cfg.analyze.truth {
        Some(p) if p.exists() => Ok(p.clone()),
        Some(p) => Err(Error::file(p, "ground-truth annotations not found")),
        None => SYNTH_ANNOTATIONS.require(cfg),
    }
}

pub fn eval(cfg: &PipelineConfig) -> Result<()> {
    let tpath = truth_path(cfg)?;
    let truth_ds = read_coco(&tpath)?;
    let frames = frames_from_coco(&truth_ds.images);
    let truth_rep = ingest_annotations(&truth_ds.annotations, &frames, DetectionSource::External);
    if !truth_rep.rejections.is_empty() {
        return Err(Error::file(
            &tpath,
            format!("{} ground-truth records do not resolve", truth_rep.rejections.len()),
        ));
    }
    let mut truth: Counts = frames.iter().map(|f| (f.tile_id.clone(), PerType::default())).collect();
    for (k, v) in count_by_tile(&truth_rep.detections) {
        truth.insert(k, v);
    }
    let predicted = match &cfg.analyze.predictions {
        Some(p) => {
            let rep = ingest_predictions(p, &frames)?;
            if !rep.rejections.is_empty() {
                log::warn!("eval: {} prediction records rejected", rep.rejections.len());
            }
            count_by_tile(&rep.detections)
        }
        None => {
            let dets: Vec<Detection> = read_json(DETECTIONS.require(cfg)?)?;
            count_by_tile(&dets)
        }
    };
    let dir = fresh_stage(cfg, "eval")?;
    let report = evaluate(&tpath.display().to_string(), &truth, &predicted)?;
    if !report.excluded.is_empty() {
        log::warn!("eval: {} predicted images have no ground truth and were excluded", report.excluded.len());
    }
    log::info!(
        "eval: RMSE BPD {:.3}, TED {:.3}, TSD {:.3} over {} images",
        report.rmse.bpd,
        report.rmse.ted,
        report.rmse.tsd,
        report.images.len()
    );
    report.save_json(dir.join(RMSE.file))?;
    report.save_errors_csv(dir.join(ERRORS.file))
}

fn heat_scale(nx: usize, ny: usize) -> u32 {
    (256 / nx.max(ny).max(1)).clamp(1, 64) as u32
}

pub fn density(cfg: &PipelineConfig) -> Result<()> {
    let (_, manifest) = tile_manifest(cfg)?;
    let dets: Vec<Detection> = read_json(DETECTIONS.require(cfg)?)?;
    let dir = fresh_stage(cfg, "density")?;
    let res = density_map(&dets, &manifest, cfg.analyze.bin_um, cfg.analyze.dedup_radius_px)?;
    for t in DislocationType::ALL {
        let m = res.maps.get(t);
        m.save_csv(dir.join(format!("{t}.csv")))?;
        m.save_png(dir.join(format!("{t}.png")), heat_scale(m.nx, m.ny))?;
        log::info!("density: {t} {} pits, peak {:.4e} cm^-2", m.total(), m.max_density());
    }
    let kept: Vec<Detection> = res.dedup.kept.iter().map(|&i| dets[i].clone()).collect();
    part_counts(&kept, &manifest).save_csv(dir.join(PARTS.file))?;
    write_json(
        dir.join(DEDUP.file),
        &serde_json::json!({
            "detections": dets.len(),
            "kept": res.dedup.kept.len(),
            "removed": res.dedup.removed,
            "out_of_bounds": res.dedup.out_of_bounds,
            "totals": PerType::from_fn(|t| res.maps.get(t).total()),
        }),
    )
}

fn copy(from: &Path, to: &Path) -> Result<()> {
    std::fs::copy(from, to).map(|_| ()).map_err(|e| Error::io(from, e))
}

pub fn report(cfg: &PipelineConfig) -> Result<()> {
    let parts = PARTS.require(cfg)?;
    let density_dir = stage_dir(cfg, "density");
    let dir = fresh_stage(cfg, "report")?;
    let mut md = String::from("# Etch-pit report\n\n## Density maps\n\n");
    for t in DislocationType::ALL {
        copy(&density_dir.join(format!("{t}.png")), &dir.join(format!("density_{t}.png")))?;
        md.push_str(&format!("- {t}: density_{t}.png\n"));
    }
    copy(&parts, &dir.join(PARTS.file))?;
    let dedup: serde_json::Value = read_json(DEDUP.require(cfg)?)?;
    md.push_str(&format!(
        "\n## Counts\n\nDetections {}, kept after overlap removal {}; per-part table in parts.csv.\n\n| type | count |\n|---|---|\n",
        dedup["detections"], dedup["kept"]
    ));
    for t in DislocationType::ALL {
        let key = t.name().to_ascii_lowercase();
        md.push_str(&format!("| {t} | {} |\n", dedup["totals"][&key]));
    }
    let rmse_path = RMSE.path(cfg);
    if rmse_path.exists() {
        let rep: RmseReport = read_json(&rmse_path)?;
        copy(&rmse_path, &dir.join(RMSE.file))?;
        copy(&ERRORS.require(cfg)?, &dir.join(ERRORS.file))?;
        md.push_str(&format!(
            "\n## Count errors ({} images)\n\n| type | RMSE | plot |\n|---|---|---|\n",
            rep.images.len()
        ));
        for t in DislocationType::ALL {
            let hist: BTreeMap<i64, usize> = rep.histogram(t);
            let name = format!("errors_{t}.png");
            plot::histogram(&hist).save(dir.join(&name)).map_err(|e| Error::file(dir.join(&name), e))?;
            md.push_str(&format!("| {t} | {:.3} | {name} |\n", rep.rmse.get(t)));
        }
    } else {
        md.push_str("\nNo evaluation found; run `pitmap eval` to add count-error plots.\n");
    }
    write_text(dir.join("summary.md"), &md)
}
