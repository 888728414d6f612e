use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{frechet_distance_features, CampaignError, FrechetSpace};
use crate::features::{
    circular_fingerprint, dice_similarity, tanimoto_similarity, Fingerprint, FragmentVocabulary, DEFAULT_FP_BITS,
    DEFAULT_FP_RADIUS,
};
use crate::generation::GeneratedBatch;
use crate::molgraph::{parse_smiles, to_canonical, MolGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub total: usize,
    pub valid: usize,
    pub unique: usize,
    pub novel: usize,
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub internal_diversity: f64,
    /// Mean over valid molecules of the Dice similarity to their nearest
    /// training neighbour, and the largest such value.
    pub mean_nearest_dice: f64,
    pub max_nearest_dice: f64,
    /// Squared Fréchet distance to the lead set; absent with fewer than two
    /// valid molecules on either side.
    pub frechet_distance: Option<f64>,
}

fn fingerprint(m: &MolGraph) -> Option<Fingerprint> {
    circular_fingerprint(m, DEFAULT_FP_RADIUS, DEFAULT_FP_BITS).ok()
}

/// 1 − mean pairwise Tanimoto; zero for fewer than two molecules.
pub fn internal_diversity(fps: &[Fingerprint]) -> f64 {
    let n = fps.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += tanimoto_similarity(&fps[i], &fps[j]).expect("same fingerprint length");
        }
    }
    1.0 - sum / (n * (n - 1) / 2) as f64
}

/// Validity, uniqueness, novelty against `train_set`, internal diversity,
/// nearest-neighbour Dice to the training set and Fréchet distance to the
/// lead set (descriptors standardised on the lead set).
pub fn eval_batch(
    batch: &GeneratedBatch,
    train_set: &[MolGraph],
    lead_set: &[MolGraph],
    vocab: &FragmentVocabulary,
) -> Result<EvalMetrics, CampaignError> {
    let total = batch.molecules.len();
    if total == 0 {
        return Err(CampaignError::EmptyBatch);
    }
    let train_canon: HashSet<String> = train_set.iter().map(|m| to_canonical(m).into_string()).collect();
    let valid: Vec<(String, MolGraph)> = batch
        .molecules
        .iter()
        .filter_map(|m| {
            let c = m.canonical.clone()?;
            let mol = parse_smiles(&c).ok()?;
            Some((c, mol))
        })
        .collect();
    let distinct: HashSet<&str> = valid.iter().map(|(c, _)| c.as_str()).collect();
    let novel = valid.iter().filter(|(c, _)| !train_canon.contains(c)).count();
    let nv = valid.len();
    let rate = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };

    let fps: Vec<Fingerprint> = valid.iter().filter_map(|(_, m)| fingerprint(m)).collect();
    let train_fps: Vec<Fingerprint> = train_set.iter().filter_map(fingerprint).collect();
    let nearest: Vec<f64> = fps
        .iter()
        .map(|f| {
            train_fps
                .iter()
                .map(|t| dice_similarity(f, t).expect("same fingerprint length"))
                .fold(0.0, f64::max)
        })
        .collect();

    let frechet = if nv >= 2 && lead_set.len() >= 2 {
        let space = FrechetSpace::fit(lead_set)?;
        let a = valid.iter().map(|(_, m)| space.features(m, vocab)).collect::<Result<Vec<_>, _>>();
        let b = lead_set.iter().map(|m| space.features(m, vocab)).collect::<Result<Vec<_>, _>>();
        match (a, b) {
            (Ok(a), Ok(b)) => Some(frechet_distance_features(&a, &b)?),
            _ => None,
        }
    } else {
        None
    };

    Ok(EvalMetrics {
        total,
        valid: nv,
        unique: distinct.len(),
        novel,
        validity: rate(nv, total),
        uniqueness: rate(distinct.len(), nv),
        novelty: rate(novel, nv),
        internal_diversity: internal_diversity(&fps),
        mean_nearest_dice: if nearest.is_empty() { 0.0 } else { nearest.iter().sum::<f64>() / nearest.len() as f64 },
        max_nearest_dice: nearest.iter().copied().fold(0.0, f64::max),
        frechet_distance: frechet,
    })
}
