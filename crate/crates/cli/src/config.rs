//! Pipeline configuration: one TOML file, unknown keys rejected, with
//! `section.key=value` overrides from the command line.

use std::path::{Path, PathBuf};

use pitmap_core::analyze::{SizeClasses, DEFAULT_DEDUP_RADIUS_PX};
use pitmap_core::embed::{EmbeddingConfig, Method};
use pitmap_core::imgproc::ImgprocParams;
use pitmap_core::synth::{preset_ranges, CountRange, Placement, DEFAULT_WINDOW};
use pitmap_core::{Error, PerType, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Master seed; stage seeds derive from it unless set explicitly.
    pub seed: u64,
    pub paths: Paths,
    pub imgproc: ImgprocParams,
    pub quality: QualitySection,
    pub embed: EmbedSection,
    pub cluster: ClusterSection,
    pub synth: SynthSection,
    pub analyze: AnalyzeSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 32,
            paths: Paths::default(),
            imgproc: ImgprocParams::default(),
            quality: QualitySection::default(),
            embed: EmbedSection::default(),
            cluster: ClusterSection::default(),
            synth: SynthSection::default(),
            analyze: AnalyzeSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Stage outputs go here.
    pub work: PathBuf,
    /// Tile manifest (JSON or CSV); image paths resolve against its folder.
    pub tiles: Option<PathBuf>,
    /// Dictionary folder; defaults to `<work>/dictionary`.
    pub dictionary: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            work: PathBuf::from("work"),
            tiles: None,
            dictionary: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualitySection {
    /// Trained gate to apply; when absent `gate` trains one on a rendered
    /// single/double corpus.
    pub model: Option<PathBuf>,
    /// External `patch_id,probability` scores; they take precedence.
    pub scores: Option<PathBuf>,
    pub corpus_per_class: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub folds: usize,
    /// Also gate patches inside `detect`.
    pub gate_detections: bool,
}

impl Default for QualitySection {
    fn default() -> Self {
        QualitySection {
            model: None,
            scores: None,
            corpus_per_class: 500,
            learning_rate: 0.5,
            epochs: 500,
            folds: 5,
            gate_detections: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSourceSetting {
    Classical,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedSection {
    pub source: FeatureSourceSetting,
    /// FVEC1 file used when `source = "external"`.
    pub external: Option<PathBuf>,
    /// Rescale each component to [0, 1] after reduction.
    pub scale: bool,
    pub method: Method,
    pub n_components: usize,
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub n_epochs: usize,
    pub learning_rate: f64,
    pub negative_sample_rate: usize,
    pub perplexity: f64,
    pub tsne_iterations: usize,
}

impl Default for EmbedSection {
    fn default() -> Self {
        let r = EmbeddingConfig::default();
        EmbedSection {
            source: FeatureSourceSetting::Classical,
            external: None,
            scale: true,
            method: r.method,
            n_components: r.n_components,
            n_neighbors: r.n_neighbors,
            min_dist: r.min_dist,
            spread: r.spread,
            n_epochs: r.n_epochs,
            learning_rate: r.learning_rate,
            negative_sample_rate: r.negative_sample_rate,
            perplexity: r.perplexity,
            tsne_iterations: r.tsne_iterations,
        }
    }
}

impl EmbedSection {
    pub fn reducer(&self, seed: u64) -> EmbeddingConfig {
        EmbeddingConfig {
            method: self.method,
            n_components: self.n_components,
            n_neighbors: self.n_neighbors,
            min_dist: self.min_dist,
            spread: self.spread,
            seed,
            n_epochs: self.n_epochs,
            learning_rate: self.learning_rate,
            negative_sample_rate: self.negative_sample_rate,
            perplexity: self.perplexity,
            tsne_iterations: self.tsne_iterations,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSection {
    /// Defaults to `max(15, N / 100)`.
    pub min_cluster_size: Option<usize>,
    /// Defaults to 10.
    pub min_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundSource {
    Procedural,
    /// Grown from `texture_seed` with non-parametric synthesis.
    Grown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub scenes: usize,
    pub width: usize,
    pub height: usize,
    /// `low`, `high` or `custom` (then `ranges` applies).
    pub preset: String,
    pub ranges: PerType<CountRange>,
    pub placement: Placement,
    pub allow_overlap: bool,
    pub backgrounds: BackgroundSource,
    pub background_count: usize,
    pub background_side: usize,
    pub texture_seed: Option<PathBuf>,
    pub texture_window: usize,
    /// Use rendered pits instead of a dictionary folder.
    pub rendered_dictionary: bool,
    pub rendered_per_type: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            scenes: 100,
            width: 512,
            height: 512,
            preset: "high".into(),
            ranges: preset_ranges("high").expect("preset"),
            placement: Placement::Random,
            allow_overlap: true,
            backgrounds: BackgroundSource::Procedural,
            background_count: 4,
            background_side: 768,
            texture_seed: None,
            texture_window: DEFAULT_WINDOW,
            rendered_dictionary: false,
            rendered_per_type: 200,
        }
    }
}

impl SynthSection {
    pub fn resolved_ranges(&self) -> Result<PerType<CountRange>> {
        match self.preset.as_str() {
            "custom" => Ok(self.ranges),
            p => preset_ranges(p).ok_or_else(|| Error::Config(format!("unknown synth preset {p:?} (low, high, custom)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeSection {
    /// Micrometres per pixel; overrides the tile manifest when set.
    pub pixel_size_um: Option<f64>,
    pub bin_um: f64,
    pub dedup_radius_px: f64,
    /// External detection results to ingest instead of running the detector.
    pub predictions: Option<PathBuf>,
    /// Ground-truth annotations; defaults to the `synth` output.
    pub truth: Option<PathBuf>,
    pub size_classes: SizeClasses,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        AnalyzeSection {
            pixel_size_um: None,
            bin_um: 1000.0,
            dedup_radius_px: DEFAULT_DEDUP_RADIUS_PX,
            predictions: None,
            truth: None,
            size_classes: SizeClasses::default(),
        }
    }
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("empty override key {key:?}")))?;
    let mut table = root;
    for p in parts {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {p} is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Parses an override value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl PipelineConfig {
    /// Reads `path` (if any), applies `key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            set_path(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let where_ = path.map(|p| p.display().to_string()).unwrap_or_else(|| "overrides".into());
        let cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{where_}: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let q = &self.quality;
        if !(q.learning_rate > 0.0) || q.epochs == 0 || q.folds < 2 {
            return Err(Error::Config("quality: learning_rate, epochs must be positive and folds >= 2".into()));
        }
        if self.embed.source == FeatureSourceSetting::External && self.embed.external.is_none() {
            return Err(Error::Config("embed: source = \"external\" needs embed.external".into()));
        }
        self.synth.resolved_ranges()?;
        if self.analyze.pixel_size_um.is_some_and(|p| !(p > 0.0)) || !(self.analyze.bin_um > 0.0) {
            return Err(Error::Config("analyze: pixel_size_um and bin_um must be positive".into()));
        }
        self.analyze.size_classes.validate()?;
        if self.synth.texture_window % 2 == 0 {
            return Err(Error::Config("synth: texture_window must be odd".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dictionary_dir(&self) -> PathBuf {
        self.paths.dictionary.clone().unwrap_or_else(|| self.paths.work.join("dictionary"))
    }
}
