//! Classifier backend: hashed n-gram features or imported embeddings, and a
//! multinomial logistic regression over either.

mod embeddings;
mod features;
mod linear;

pub use embeddings::{load_embeddings, EmbeddingHeader, EmbeddingStore, EmbeddingVector};
pub use features::{mix_hash, splitmix, FeatureVector, Featurizer};
pub use linear::{
    argmax, loss_and_gradient, softmax_in_place, train, Hyperparams, LinearModel, LinearModelFile,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How proposition text becomes a feature vector.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSource {
    Hashed(Featurizer),
    /// Vectors looked up by expression id.
    Embeddings(EmbeddingStore),
}

/// Persisted description of a [`FeatureSource`]; embeddings are stored by
/// reference (width and encoder name), not by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Hashed(Featurizer),
    Embeddings { dim: usize, encoder: String },
}

impl FeatureSource {
    pub fn dim(&self) -> usize {
        match self {
            FeatureSource::Hashed(f) => f.dim,
            FeatureSource::Embeddings(s) => s.dim(),
        }
    }

    pub fn features(&self, id: &str, text: &str) -> Result<FeatureVector> {
        match self {
            FeatureSource::Hashed(f) => Ok(f.featurize(text)),
            FeatureSource::Embeddings(s) => Ok(s.get(id)?.features()),
        }
    }

    pub fn spec(&self) -> BackendSpec {
        match self {
            FeatureSource::Hashed(f) => BackendSpec::Hashed(*f),
            FeatureSource::Embeddings(s) => BackendSpec::Embeddings {
                dim: s.dim(),
                encoder: s.header.encoder.clone(),
            },
        }
    }

    /// Checks that a persisted model was trained on a compatible backend.
    pub fn check_matches(&self, spec: &BackendSpec) -> Result<()> {
        match (self, spec) {
            (FeatureSource::Hashed(f), BackendSpec::Hashed(g)) if f == g => Ok(()),
            (FeatureSource::Embeddings(s), BackendSpec::Embeddings { dim, .. })
                if s.dim() == *dim =>
            {
                Ok(())
            }
            _ => Err(Error::InvalidConfig(format!(
                "model backend {spec:?} does not match configured backend {:?}",
                self.spec()
            ))),
        }
    }
}
