//! Patch feature vectors and reduction to a low-dimensional latent space.

mod classical;
mod fvec;
mod knn;
mod pca;
mod scale;
mod tsne;
pub mod umap;

use serde::{Deserialize, Serialize};

pub use classical::{
    classical_features, classical_features_raw, hu_moments, otsu_threshold, ClassicalRaw, MinMaxScaler,
    CLASSICAL_DIM, PATCH_SIDE,
};
pub use fvec::{decode_fvec, encode_fvec, read_fvec, write_fvec, FVEC_MAGIC};
pub use knn::{knn_exact, Knn};
pub use pca::{reduce_pca, Pca};
pub use scale::scale_components;
pub use tsne::{reduce_tsne, TsneTrace};
pub use umap::{reduce_umap, UmapModel};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Classical,
    External,
}

/// One patch's representation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub id: String,
    pub values: Vec<T>,
    pub source: FeatureSource,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Row matrix of a feature set, checking finiteness and a constant dimension.
pub fn feature_matrix<T: Scalar>(features: &[FeatureVector<T>]) -> Result<Vec<Vec<T>>> {
    let rows: Vec<Vec<T>> = features.iter().map(|f| f.values.clone()).collect();
    validate_rows(&rows)?;
    Ok(rows)
}

pub(crate) fn validate_rows<T: Scalar>(rows: &[Vec<T>]) -> Result<usize> {
    let Some(first) = rows.first() else {
        return Err(Error::InvalidInput("empty feature set".into()));
    };
    let dim = first.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::InvalidInput(format!(
                "row {i} has dimension {}, expected {dim}",
                r.len()
            )));
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("row {i} has non-finite value at {j}")));
        }
    }
    Ok(dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Umap,
    Pca,
    Tsne,
}

/// Reduction settings. The defaults are the pipeline's: 3 components,
/// 10 neighbours, minimum distance 0.3, seed 32.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub method: Method,
    pub n_components: usize,
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub seed: u64,
    pub n_epochs: usize,
    pub learning_rate: f64,
    pub negative_sample_rate: usize,
    pub perplexity: f64,
    pub tsne_iterations: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            method: Method::Umap,
            n_components: 3,
            n_neighbors: 10,
            min_dist: 0.3,
            spread: 1.0,
            seed: 32,
            n_epochs: 200,
            learning_rate: 1.0,
            negative_sample_rate: 5,
            perplexity: 30.0,
            tsne_iterations: 500,
        }
    }
}

/// Low-dimensional coordinates, one row per input point.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    pub coords: Vec<Vec<T>>,
    pub n_components: usize,
    /// Row `i` came from input row `source_index[i]`.
    pub source_index: Vec<usize>,
    pub config: Option<EmbeddingConfig>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new(coords: Vec<Vec<T>>, n_components: usize) -> Self {
        let n = coords.len();
        Embedding {
            coords,
            n_components,
            source_index: (0..n).collect(),
            config: None,
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        self.coords.iter().map(|r| r[c]).collect()
    }
}

/// Dispatches on `config.method`.
pub fn reduce<T: Scalar>(rows: &[Vec<T>], config: &EmbeddingConfig) -> Result<Embedding<T>> {
    let mut e = match config.method {
        Method::Umap => reduce_umap(rows, config)?,
        Method::Pca => reduce_pca(rows, config.n_components)?.embedding,
        Method::Tsne => reduce_tsne(rows, config)?.0,
    };
    e.config = Some(config.clone());
    Ok(e)
}
