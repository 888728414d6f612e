//! Feature views of a molecule: circular fingerprint bits, a fixed descriptor
//! vector and a fragment-embedding average, plus similarity and clustering.

mod butina;
mod descriptors;
mod fingerprint;
mod similarity;
mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::MolGraph;
use crate::properties::PropertyError;

pub use butina::{butina_cluster, Clustering};
pub use descriptors::{descriptor_vector, DescriptorVector, DESCRIPTOR_NAMES, DESCRIPTOR_SCHEMA};
pub use fingerprint::{circular_environments, circular_fingerprint, stable_hash, Environment, Fingerprint};
pub use similarity::{dice_similarity, tanimoto_similarity};
pub use vocab::{
    build_fragment_vocabulary, build_fragment_vocabulary_with, fragment_tokens, mol2vec_embed, EmbeddingVector,
    FragmentVocabulary, SaCalibration, SkipGramParams, VocabError,
};

pub const DEFAULT_FP_RADIUS: u32 = 3;
pub const DEFAULT_FP_BITS: usize = 2048;
pub const DEFAULT_VOCAB_RADIUS: u32 = 2;
pub const DEFAULT_EMBED_DIM: usize = 128;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("multi-fragment molecules cannot be featurized")]
    MultiFragmentInput,
    #[error("molecule has no fragment tokens")]
    NoTokens,
    #[error("fingerprint lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("fragment vocabulary is empty")]
    EmptyVocabulary,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Property(#[from] PropertyError),
}

/// The three views of one molecule, computed from the same graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureViews {
    pub fingerprint: Fingerprint,
    pub descriptors: DescriptorVector,
    pub embedding: EmbeddingVector,
}

impl FeatureViews {
    pub fn compute(mol: &MolGraph, vocab: &FragmentVocabulary) -> Result<Self, FeatureError> {
        Ok(FeatureViews {
            fingerprint: circular_fingerprint(mol, DEFAULT_FP_RADIUS, DEFAULT_FP_BITS)?,
            descriptors: descriptor_vector(mol)?,
            embedding: mol2vec_embed(mol, vocab)?,
        })
    }
}
