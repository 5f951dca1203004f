//! Dictionary discovery: extract, gate, features, embed, cluster, dict.

use std::collections::HashMap;

use pitmap_core::analyze::TileManifest;
use pitmap_core::cluster::{assign_types, hdbscan, ClusterParams, ClusterStats};
use pitmap_core::dictionary::{DictEntry, Dictionary};
use pitmap_core::embed::{
    classical_features, classical_features_raw, feature_matrix, read_fvec, reduce, scale_components, write_fvec,
    FeatureVector,
};
use pitmap_core::imgproc::{extract_patch, find_candidates, BBox, EllipseFit, GateVerdict, Patch, ShapeDescriptors};
use pitmap_core::quality::{crossval, predict_with_scores, read_scores, train_quality, QualityModel, TrainOptions};
use pitmap_core::synth::single_double_corpus;
use pitmap_core::{BinaryMask, DislocationType, Error, GrayImage, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::*;
use crate::config::{FeatureSourceSetting, PipelineConfig};
use crate::seeds;

/// One segmented blob; kept blobs also have a patch on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub patch_id: String,
    pub tile_id: String,
    pub kept: bool,
    /// Patch origin in tile pixels.
    pub origin: (usize, usize),
    pub region: BBox,
    pub clipped: bool,
    pub bbox: BBox,
    pub centroid: (f64, f64),
    pub area: usize,
    pub ellipse: EllipseFit,
    pub descriptors: ShapeDescriptors,
    pub gate: GateVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRow {
    pub patch_id: String,
    pub probability: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub patch_id: String,
    pub cluster: i64,
    pub strength: f64,
    pub assigned_type: Option<DislocationType>,
}

pub fn tile_manifest(cfg: &PipelineConfig) -> Result<(std::path::PathBuf, TileManifest)> {
    let path = cfg
        .paths
        .tiles
        .clone()
        .ok_or_else(|| Error::Config("paths.tiles is not set; point it at a tile manifest (JSON or CSV)".into()))?;
    let m = TileManifest::load(&path, cfg.analyze.pixel_size_um)?;
    Ok((path, m))
}

pub fn load_tile(manifest_path: &std::path::Path, rec: &pitmap_core::analyze::TileRecord) -> Result<GrayImage> {
    let p = beside(manifest_path, &rec.image);
    let img = GrayImage::load(&p)?;
    if img.width() != rec.width || img.height() != rec.height {
        return Err(Error::file(
            &p,
            format!("image is {}x{}, manifest says {}x{}", img.width(), img.height(), rec.width, rec.height),
        ));
    }
    Ok(img)
}

pub fn extract(cfg: &PipelineConfig) -> Result<()> {
    let (mpath, manifest) = tile_manifest(cfg)?;
    let dir = fresh_stage(cfg, "extract")?;
    let patches = dir.join(PATCHES.file);
    create_dir(&patches)?;
    let per_tile: Vec<Vec<CandidateRecord>> = manifest
        .tiles
        .par_iter()
        .map(|rec| -> Result<Vec<CandidateRecord>> {
            let img = load_tile(&mpath, rec)?;
            let (_, cands) = find_candidates(&img, &cfg.imgproc)?;
            let mut out = Vec::with_capacity(cands.len());
            for (k, c) in cands.into_iter().enumerate() {
                let patch = extract_patch(&img, &c.blob, cfg.imgproc.border);
                let id = format!("{}_{k:04}", rec.tile_id);
                let kept = c.verdict.is_keep();
                if kept {
                    patch.image.save_png(patches.join(format!("{id}.png")))?;
                    patch.mask.save_png(patches.join(format!("{id}_mask.png")))?;
                }
                out.push(CandidateRecord {
                    patch_id: id,
                    tile_id: rec.tile_id.clone(),
                    kept,
                    origin: patch.origin,
                    region: patch.region,
                    clipped: patch.clipped,
                    bbox: c.blob.bbox,
                    centroid: c.blob.centroid,
                    area: c.blob.area,
                    ellipse: c.fit,
                    descriptors: c.descriptors,
                    gate: c.verdict,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let all: Vec<CandidateRecord> = per_tile.into_iter().flatten().collect();
    let kept = all.iter().filter(|c| c.kept).count();
    log::info!("extract: {} candidates from {} tiles, {kept} pass the shape gate", all.len(), manifest.tiles.len());
    write_jsonl(dir.join(CANDIDATES.file), &all)
}

fn kept_candidates(cfg: &PipelineConfig) -> Result<Vec<CandidateRecord>> {
    let path = CANDIDATES.require(cfg)?;
    let all: Vec<CandidateRecord> = read_jsonl(&path)?;
    Ok(all.into_iter().filter(|c| c.kept).collect())
}

fn load_patch(cfg: &PipelineConfig, c: &CandidateRecord) -> Result<Patch> {
    let dir = PATCHES.require(cfg)?;
    let image = GrayImage::load(dir.join(format!("{}.png", c.patch_id)))?;
    let mask = BinaryMask::load(dir.join(format!("{}_mask.png", c.patch_id)))?;
    Ok(Patch {
        image,
        mask,
        origin: c.origin,
        region: c.region,
        border: cfg.imgproc.border,
        clipped: c.clipped,
        blob_index: None,
    })
}

fn train_options(cfg: &PipelineConfig) -> TrainOptions {
    TrainOptions {
        learning_rate: cfg.quality.learning_rate,
        epochs: cfg.quality.epochs,
        seed: cfg.seed,
    }
}

/// Trains the single-vs-double gate on a rendered corpus.
pub fn train_default_gate(cfg: &PipelineConfig) -> Result<(QualityModel<f64>, Vec<f64>)> {
    let mut rng = seeds::rng(cfg.seed, seeds::QUALITY_CORPUS);
    let data = single_double_corpus(cfg.quality.corpus_per_class, &mut rng);
    let opts = train_options(cfg);
    let folds = crossval::<f64>(&data, cfg.quality.folds, cfg.seed, &opts)?;
    let model = train_quality::<f64>(&data, &opts)?;
    Ok((model, folds))
}

pub fn gate(cfg: &PipelineConfig) -> Result<()> {
    let cands = kept_candidates(cfg)?;
    let dir = fresh_stage(cfg, "gate")?;
    let model = match &cfg.quality.model {
        Some(p) => QualityModel::<f64>::load(p)?,
        None => {
            let (m, folds) = train_default_gate(cfg)?;
            let mean = folds.iter().sum::<f64>() / folds.len() as f64;
            log::info!("gate: trained on rendered corpus, cross-validated accuracy {mean:.3}");
            write_json(dir.join(CROSSVAL.file), &serde_json::json!({ "folds": folds, "mean": mean }))?;
            m
        }
    };
    model.save(dir.join(QUALITY_MODEL.file))?;
    let scores = match &cfg.quality.scores {
        Some(p) => read_scores(p)?,
        None => HashMap::new(),
    };
    let rows: Vec<GateRow> = cands
        .par_iter()
        .map(|c| -> Result<GateRow> {
            let patch = load_patch(cfg, c)?;
            let q = predict_with_scores(Some(&model), &scores, &c.patch_id, &patch.image).expect("model present");
            Ok(GateRow {
                patch_id: c.patch_id.clone(),
                probability: q.probability,
                label: q.label,
            })
        })
        .collect::<Result<_>>()?;
    let accepted = rows.iter().filter(|r| r.label == 1).count();
    log::info!("gate: {accepted} of {} patches accepted", rows.len());
    write_csv(dir.join(GATE_CSV.file), &rows)
}

/// Candidates that passed both gates, in extraction order.
fn accepted(cfg: &PipelineConfig) -> Result<Vec<CandidateRecord>> {
    let cands = kept_candidates(cfg)?;
    let gate: Vec<GateRow> = read_csv(GATE_CSV.require(cfg)?)?;
    let ok: HashMap<String, u8> = gate.into_iter().map(|r| (r.patch_id, r.label)).collect();
    Ok(cands
        .into_iter()
        .filter(|c| ok.get(&c.patch_id) == Some(&1))
        .collect())
}

pub fn features(cfg: &PipelineConfig) -> Result<()> {
    let cands = accepted(cfg)?;
    if cands.is_empty() {
        return Err(Error::InvalidInput("no patches passed the quality gate".into()));
    }
    let ids: Vec<String> = cands.iter().map(|c| c.patch_id.clone()).collect();
    let dir = fresh_stage(cfg, "features")?;
    let feats: Vec<FeatureVector<f64>> = match cfg.embed.source {
        FeatureSourceSetting::Classical => {
            let raw = cands
                .par_iter()
                .map(|c| load_patch(cfg, c).map(|p| classical_features_raw(&p)))
                .collect::<Result<Vec<_>>>()?;
            let empty = raw.iter().filter(|r| r.empty_binary).count();
            if empty > 0 {
                log::warn!("features: {empty} patches have an empty Otsu binary; shape moments set to 0");
            }
            let (feats, scaler) = classical_features::<f64>(&ids, &raw)?;
            write_json(dir.join(SCALER.file), &scaler)?;
            feats
        }
        FeatureSourceSetting::External => {
            let path = cfg.embed.external.as_ref().expect("validated");
            let ext: Vec<FeatureVector<f64>> = read_fvec(path)?;
            let mut by_id: HashMap<String, FeatureVector<f64>> = ext.into_iter().map(|f| (f.id.clone(), f)).collect();
            ids.iter()
                .map(|id| by_id.remove(id).ok_or_else(|| Error::file(path, format!("no vector for patch {id}"))))
                .collect::<Result<_>>()?
        }
    };
    log::info!("features: {} vectors of dimension {}", feats.len(), feats[0].dim());
    write_fvec(dir.join(FEATURES.file), &feats)
}

pub fn embed(cfg: &PipelineConfig) -> Result<()> {
    let feats: Vec<FeatureVector<f64>> = read_fvec(FEATURES.require(cfg)?)?;
    let dir = fresh_stage(cfg, "embed")?;
    let rows = feature_matrix(&feats)?;
    let mut e = reduce(&rows, &cfg.embed.reducer(cfg.seed))?;
    if cfg.embed.scale {
        e = scale_components(&e)?;
    }
    for w in &e.warnings {
        log::warn!("embed: {w}");
    }
    let path = dir.join(EMBEDDING.file);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::file(&path, e))?;
    let mut header = vec!["patch_id".to_string()];
    header.extend((1..=e.n_components).map(|c| format!("c{c}")));
    w.write_record(&header).map_err(|e| Error::file(&path, e))?;
    for (i, row) in e.coords.iter().enumerate() {
        let mut rec = vec![feats[e.source_index[i]].id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::file(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

pub fn read_embedding(path: &std::path::Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::file(path, e))?;
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::file(path, e))?;
        ids.push(rec.get(0).unwrap_or_default().to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| Error::file(path, format!("{v:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        coords.push(row);
    }
    Ok((ids, coords))
}

#[derive(Serialize)]
struct TypesReport<'a> {
    points: usize,
    clusters: usize,
    noise_fraction: f64,
    min_cluster_size: usize,
    min_samples: usize,
    stats: &'a [ClusterStats],
    assignment: Vec<(usize, Option<DislocationType>)>,
    unassigned_types: &'a [DislocationType],
    warnings: Vec<String>,
}

pub fn cluster(cfg: &PipelineConfig) -> Result<()> {
    let (ids, coords) = read_embedding(&EMBEDDING.require(cfg)?)?;
    let cands: HashMap<String, CandidateRecord> =
        kept_candidates(cfg)?.into_iter().map(|c| (c.patch_id.clone(), c)).collect();
    let dir = fresh_stage(cfg, "cluster")?;
    let mut params = ClusterParams::for_size(ids.len());
    if let Some(m) = cfg.cluster.min_cluster_size {
        params.min_cluster_size = m;
    }
    if let Some(m) = cfg.cluster.min_samples {
        params.min_samples = m;
    }
    let labeling = hdbscan(&coords, &params)?;
    let desc = ids
        .iter()
        .map(|id| {
            cands
                .get(id)
                .map(|c| c.descriptors)
                .ok_or_else(|| Error::InvalidInput(format!("embedded patch {id} is not among the extracted candidates")))
        })
        .collect::<Result<Vec<_>>>()?;
    let lengthiness: Vec<f64> = desc.iter().map(|d| d.lengthiness).collect();
    let areas: Vec<f64> = desc.iter().map(|d| d.area as f64).collect();
    let assignment = assign_types(&labeling, &lengthiness, &areas)?;
    let rows: Vec<LabelRow> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| LabelRow {
            patch_id: id.clone(),
            cluster: labeling.labels[i],
            strength: labeling.strengths[i],
            assigned_type: assignment.type_of(labeling.labels[i]),
        })
        .collect();
    let mut warnings = labeling.warnings.clone();
    warnings.extend(assignment.warnings.iter().cloned());
    if labeling.n_clusters != 3 {
        warnings.push(format!("found {} clusters where 3 pit morphologies are expected", labeling.n_clusters));
    }
    for w in &warnings {
        log::warn!("cluster: {w}");
    }
    log::info!(
        "cluster: {} clusters over {} patches, noise {:.3}",
        labeling.n_clusters,
        ids.len(),
        labeling.noise_fraction()
    );
    write_csv(dir.join(LABELS.file), &rows)?;
    write_json(
        dir.join(TYPES.file),
        &TypesReport {
            points: ids.len(),
            clusters: labeling.n_clusters,
            noise_fraction: labeling.noise_fraction(),
            min_cluster_size: params.min_cluster_size,
            min_samples: params.min_samples,
            stats: &assignment.stats,
            assignment: (0..labeling.n_clusters).map(|c| (c, assignment.types[c])).collect(),
            unassigned_types: &assignment.unassigned_types,
            warnings,
        },
    )
}

pub fn dict(cfg: &PipelineConfig) -> Result<()> {
    let labels: Vec<LabelRow> = read_csv(LABELS.require(cfg)?)?;
    let cands: HashMap<String, CandidateRecord> =
        kept_candidates(cfg)?.into_iter().map(|c| (c.patch_id.clone(), c)).collect();
    let out = cfg.dictionary_dir();
    if out.exists() {
        std::fs::remove_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    }
    create_dir(&out)?;
    write_text(out.join(CONFIG_SNAPSHOT), &cfg.to_toml())?;
    let entries = labels
        .iter()
        .filter_map(|r| r.assigned_type.map(|t| (r, t)))
        .map(|(r, t)| -> Result<DictEntry> {
            let c = cands
                .get(&r.patch_id)
                .ok_or_else(|| Error::InvalidInput(format!("labeled patch {} is not among the candidates", r.patch_id)))?;
            let p = load_patch(cfg, c)?;
            Ok(DictEntry {
                id: r.patch_id.clone(),
                dtype: t,
                image: p.image,
                mask: p.mask,
                source: c.tile_id.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let d = Dictionary { entries };
    let n = d.counts();
    log::info!("dict: BPD {}, TED {}, TSD {} patches", n.bpd, n.ted, n.tsd);
    d.save(&out)
}
