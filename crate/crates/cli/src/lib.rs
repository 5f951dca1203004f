//! Command-line pipeline: every subcommand reads the files written by the
//! stage before it under the work directory and writes its own.
//!
//! | stage | writes |
//! |---|---|
//! | `extract` | `extract/candidates.jsonl`, `extract/patches/` |
//! | `gate` | `gate/gate.csv`, `gate/quality_model.json` |
//! | `features` | `features/features.fvec` |
//! | `embed` | `embed/embedding.csv` |
//! | `cluster` | `cluster/labels.csv`, `cluster/types.json` |
//! | `dict` | the dictionary folder (`dictionary/` by default) |
//! | `synth` | `synth/images/`, `synth/annotations.json`, `synth/tiles.json` |
//! | `detect` | `detect/detections.json`, `detect/radii.csv` |
//! | `eval` | `eval/rmse.json`, `eval/errors.csv` |
//! | `density` | `density/<TYPE>.csv|png`, `density/parts.csv` |
//! | `report` | `report/` |

pub mod analysis;
pub mod artifacts;
pub mod config;
pub mod discover;
mod plot;
pub mod seeds;
pub mod synthesize;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use pitmap_core::Error;

pub use config::PipelineConfig;
pub use synthesize::SynthFlags;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pitmap", version, about = "Etch-pit extraction, clustering, synthesis and wafer counting")]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set embed.n_neighbors=15`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for tile and scene parallelism.
    #[arg(short, long, global = true)]
    pub jobs: Option<usize>,
    /// Work directory (overrides `paths.work`).
    #[arg(short, long, global = true)]
    pub work: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment tiles and cut patches around shape-gated candidates.
    Extract,
    /// Score patches with the quality gate.
    Gate,
    /// Compute feature vectors for accepted patches.
    Features,
    /// Reduce features to a low-dimensional embedding.
    Embed,
    /// Cluster the embedding and assign dislocation types.
    Cluster,
    /// Write the etch-pit dictionary from typed clusters.
    Dict,
    /// Compose annotated synthetic scenes.
    Synth {
        /// Number of scenes.
        #[arg(long)]
        n: Option<usize>,
        /// Count-range preset (`low`, `high`).
        #[arg(long)]
        ranges: Option<String>,
        /// Forbid overlapping pits.
        #[arg(long)]
        clean: bool,
    },
    /// Detect pits on every tile, or ingest external predictions.
    Detect,
    /// Per-type count RMSE against ground truth.
    Eval,
    /// Density maps and per-part counts.
    Density,
    /// Bundle maps, tables and error plots.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Extract => "extract",
            Command::Gate => "gate",
            Command::Features => "features",
            Command::Embed => "embed",
            Command::Cluster => "cluster",
            Command::Dict => "dict",
            Command::Synth { .. } => "synth",
            Command::Detect => "detect",
            Command::Eval => "eval",
            Command::Density => "density",
            Command::Report => "report",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_DATA
    }
}

/// Resolves the configuration for `cli`: file, `--set` overrides, then flags.
pub fn resolve_config(cli: &Cli) -> pitmap_core::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = &cli.work {
        cfg.paths.work = w.clone();
    }
    if let Command::Synth { n, ranges, clean } = &cli.command {
        SynthFlags {
            n: *n,
            ranges: ranges.clone(),
            clean: *clean,
        }
        .apply(&mut cfg)?;
    }
    Ok(cfg)
}

pub fn run_command(command: &Command, cfg: &PipelineConfig) -> pitmap_core::Result<()> {
    match command {
        Command::Extract => discover::extract(cfg),
        Command::Gate => discover::gate(cfg),
        Command::Features => discover::features(cfg),
        Command::Embed => discover::embed(cfg),
        Command::Cluster => discover::cluster(cfg),
        Command::Dict => discover::dict(cfg),
        Command::Synth { .. } => synthesize::synth(cfg),
        Command::Detect => analysis::detect(cfg),
        Command::Eval => analysis::eval(cfg),
        Command::Density => analysis::density(cfg),
        Command::Report => analysis::report(cfg),
    }
}

/// Parses `args`, runs one subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = resolve_config(&cli).and_then(|cfg| {
        let go = || run_command(&cli.command, &cfg);
        match cli.jobs {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("--jobs {n}: {e}")))?
                .install(go),
            None => go(),
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("pitmap {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}
