//! Per-tile detection or ingest, count evaluation, and wafer aggregation.

mod density;
mod detect;
mod evaluate;
mod ingest;
mod manifest;
mod radius;

pub use density::{
    dedup_overlaps, density_map, part_counts, Dedup, DensityMap, DensityResult, OutOfBounds, PartCounts,
    DEFAULT_DEDUP_RADIUS_PX,
};
pub use detect::{detect_tile, Detection, DetectionSource, DetectorModel, TileDetections, Unclassified};
pub use evaluate::{count_by_tile, evaluate, rmse, Counts, RmseReport};
pub use ingest::{
    coco_tile_id, frames_from_coco, frames_from_manifest, ingest_annotations, ingest_predictions, load_predictions,
    Frame, IngestReject, IngestReport, Rejection,
};
pub use manifest::{TileManifest, TileRecord, DEFAULT_PIXEL_SIZE_UM, PARTS};
pub use radius::{burgers_radius, PitRadius, SizeClasses};
