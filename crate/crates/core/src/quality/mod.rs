//! Gate that keeps patches showing exactly one clean etch pit.
//!
//! Patches become a three-channel stack (intensity, Fourier magnitude, Haar
//! wavelet map), pooled to 96 statistics and scored by logistic regression.

mod channels;
mod data;
mod model;

pub use channels::{
    build_channels, featurize_channels, fft_magnitude, haar_level1, quality_features, ChannelStack, HaarBands,
    FEATURE_LAYOUT, QUALITY_DIM, SIDE,
};
pub use data::{stratified_folds, Augmentation, LabeledPatchSet};
pub use model::{
    crossval, layout_hash, loss_and_grad, predict_quality, predict_with_scores, read_scores, train_on_features,
    train_quality, QualityModel, QualityPrediction, TrainOptions,
};
