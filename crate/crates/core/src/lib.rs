//! Etch-pit analysis for KOH-etched SiC wafers.
//!
//! The numeric modules ([`embed`], [`cluster`], [`quality`], parts of
//! [`analyze`]) are generic over [`Scalar`]; the aliases below fix them to
//! `f64`, which is what the command-line pipeline uses.

pub mod analyze;
pub mod cluster;
pub mod defect;
pub mod dictionary;
pub mod embed;
pub mod error;
pub mod imgproc;
pub mod linalg;
pub mod quality;
pub mod raster;
pub mod scalar;
pub mod synth;

pub use defect::{DislocationType, PerType};
pub use error::{Error, Result};
pub use raster::{BinaryMask, GrayImage, LocalMask};
pub use scalar::Scalar;

pub type FeatureVector = embed::FeatureVector<f64>;
pub type Embedding = embed::Embedding<f64>;
pub type Pca = embed::Pca<f64>;
pub type UmapModel = embed::UmapModel<f64>;
pub type QualityModel = quality::QualityModel<f64>;
pub type DetectorModel = analyze::DetectorModel<f64>;
pub type MstEdge = cluster::MstEdge<f64>;
