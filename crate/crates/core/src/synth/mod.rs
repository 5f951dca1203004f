//! Synthetic training data: rendered pits, grown or procedural backgrounds,
//! composed scenes and COCO-style export.

mod coco;
mod pit;
mod scene;
mod texture;

pub use coco::{
    decode_rle, encode_rle, export_dataset, read_coco, rasterize_polygons, scenes_to_coco, CocoAnnotation, CocoCategory,
    CocoDataset, CocoImage, Rle, RleCounts, Segmentation, ANNOTATIONS_FILE,
};
pub use pit::{
    plain_canvas, render_double, render_pit, single_double_corpus, synthetic_dictionary, PitShape, BPD_AXIS, PIT_BORDER,
};
pub use scene::{
    compose_batch, compose_scene, preset_ranges, scene_seed, Background, CountRange, Instance, Placement, SceneSpec,
    SyntheticScene, CLEARANCE, FEATHER, MAX_RETRIES,
};
pub use texture::{grow_texture, procedural_background, DEFAULT_WINDOW, EPSILON};
