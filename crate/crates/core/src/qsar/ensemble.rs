use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_gbt, FeatureView, GbtModel, GbtParams, QsarError};
use crate::features::{
    circular_fingerprint, descriptor_vector, mol2vec_embed, FeatureError, FragmentVocabulary, DEFAULT_FP_BITS,
    DEFAULT_FP_RADIUS,
};
use crate::molgraph::MolGraph;

/// Dense feature vector of one view.
pub fn featurize_view(mol: &MolGraph, view: FeatureView, vocab: &FragmentVocabulary) -> Result<Vec<f64>, FeatureError> {
    Ok(match view {
        FeatureView::Fingerprint => circular_fingerprint(mol, DEFAULT_FP_RADIUS, DEFAULT_FP_BITS)?.to_dense(),
        FeatureView::Descriptor => descriptor_vector(mol)?.values,
        FeatureView::Embedding => mol2vec_embed(mol, vocab)?.values,
    })
}

/// One boosted model per view plus the vocabulary the embedding view needs.
#[derive(Debug, Clone)]
pub struct EnsemblePredictor {
    models: [GbtModel; 3],
    vocab: Arc<FragmentVocabulary>,
}

/// Per-view predictions in [`FeatureView::ALL`] order and their mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Consensus {
    pub per_view: [f64; 3],
    pub mean: f64,
}

impl Consensus {
    pub fn from_views(per_view: [f64; 3]) -> Self {
        Consensus { per_view, mean: (per_view[0] + per_view[1] + per_view[2]) / 3.0 }
    }

    pub fn min(&self) -> f64 {
        self.per_view.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Every view strictly above `cutoff`.
    pub fn all_above(&self, cutoff: f64) -> bool {
        self.per_view.iter().all(|&p| p > cutoff)
    }
}

impl EnsemblePredictor {
    pub fn from_parts(models: [GbtModel; 3], vocab: Arc<FragmentVocabulary>) -> Result<Self, QsarError> {
        for (m, v) in models.iter().zip(FeatureView::ALL) {
            if m.feature_view != Some(v) {
                return Err(QsarError::Format(format!("model for {} view is missing or misplaced", v.name())));
            }
        }
        Ok(EnsemblePredictor { models, vocab })
    }

    pub fn model(&self, view: FeatureView) -> &GbtModel {
        &self.models[view as usize]
    }

    pub fn vocab(&self) -> &Arc<FragmentVocabulary> {
        &self.vocab
    }

    pub fn predict_view(&self, mol: &MolGraph, view: FeatureView) -> Result<f64, QsarError> {
        let x = featurize_view(mol, view, &self.vocab)?;
        self.model(view).predict(&x)
    }

    /// Writes `fingerprint.json`, `descriptor.json`, `embedding.json` and
    /// `vocab.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), QsarError> {
        fs::create_dir_all(dir).map_err(|e| QsarError::Io(e.to_string()))?;
        for v in FeatureView::ALL {
            self.model(v).save(&dir.join(format!("{}.json", v.name())))?;
        }
        self.vocab.save(&dir.join("vocab.txt"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, QsarError> {
        let vocab = Arc::new(FragmentVocabulary::load(&dir.join("vocab.txt"))?);
        let load = |v: FeatureView| GbtModel::load(&dir.join(format!("{}.json", v.name())));
        let models = [load(FeatureView::Fingerprint)?, load(FeatureView::Descriptor)?, load(FeatureView::Embedding)?];
        EnsemblePredictor::from_parts(models, vocab)
    }
}

fn train_view(
    mols: &[MolGraph],
    labels: &[f64],
    vocab: &FragmentVocabulary,
    params: &GbtParams,
    view: FeatureView,
) -> Result<GbtModel, QsarError> {
    let x: Vec<Vec<f64>> =
        mols.par_iter().map(|m| featurize_view(m, view, vocab)).collect::<Result<_, _>>()?;
    let mut model = train_gbt(&x, labels, params)?;
    model.feature_view = Some(view);
    log::debug!("trained {} view with {} trees", view.name(), model.trees.len());
    Ok(model)
}

/// Trains the three view models on the same molecules and labels.
pub fn train_ensemble(
    mols: &[MolGraph],
    labels: &[f64],
    vocab: Arc<FragmentVocabulary>,
    params: &GbtParams,
) -> Result<EnsemblePredictor, QsarError> {
    if mols.len() != labels.len() {
        return Err(QsarError::LengthMismatch(mols.len(), labels.len()));
    }
    let trained: Vec<Result<GbtModel, QsarError>> =
        FeatureView::ALL.par_iter().map(|&v| train_view(mols, labels, &vocab, params, v)).collect();
    let mut it = trained.into_iter();
    let models = [it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?];
    EnsemblePredictor::from_parts(models, vocab)
}

pub fn consensus_predict(ens: &EnsemblePredictor, mol: &MolGraph) -> Result<Consensus, QsarError> {
    let mut per_view = [0.0; 3];
    for (slot, v) in per_view.iter_mut().zip(FeatureView::ALL) {
        *slot = ens.predict_view(mol, v)?;
    }
    Ok(Consensus::from_views(per_view))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consensus_arithmetic() {
        assert_eq!(Consensus::from_views([9.0, 9.0, 9.0]).mean, 9.0);
        let c = Consensus::from_views([8.0, 9.0, 10.0]);
        assert_eq!(c.mean, 9.0);
        assert_eq!(c.min(), 8.0);
        assert!(c.all_above(7.5) && !c.all_above(8.0));
    }
}
