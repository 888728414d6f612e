use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{regression_metrics, train_ensemble, FeatureView, GbtParams, QsarError};
use crate::features::{build_fragment_vocabulary_with, SkipGramParams};
use crate::molgraph::MolGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub view: FeatureView,
    pub fold_r2: Vec<f64>,
    pub fold_rmse: Vec<f64>,
    pub mean_r2: f64,
    pub mean_rmse: f64,
    pub fold_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub reports: Vec<CvReport>,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl CvSummary {
    pub fn report(&self, view: FeatureView) -> &CvReport {
        self.reports.iter().find(|r| r.view == view).expect("every view is reported")
    }

    /// One row per view and fold plus a `mean` row per view.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("view\tfold\tr2\trmse\n");
        for r in &self.reports {
            for (k, (a, b)) in r.fold_r2.iter().zip(&r.fold_rmse).enumerate() {
                let _ = writeln!(s, "{}\t{}\t{}\t{}", r.view.name(), k, a, b);
            }
            let _ = writeln!(s, "{}\tmean\t{}\t{}", r.view.name(), r.mean_r2, r.mean_rmse);
        }
        s
    }
}

/// Seeded shuffle of `0..n` dealt round-robin into `folds` sorted folds.
pub fn fold_split(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (k, i) in idx.into_iter().enumerate() {
        out[k % folds].push(i);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    out
}

/// K-fold cross-validation of all three views. The vocabulary is rebuilt
/// from the training folds of each split, so held-out molecules never
/// influence their own features.
pub fn cross_validate(
    mols: &[MolGraph],
    labels: &[f64],
    vocab_params: &SkipGramParams,
    params: &GbtParams,
    folds: usize,
    seed: u64,
) -> Result<CvSummary, QsarError> {
    if mols.len() != labels.len() {
        return Err(QsarError::LengthMismatch(mols.len(), labels.len()));
    }
    if folds < 2 || mols.len() < folds {
        return Err(QsarError::InsufficientData { needed: folds.max(2), available: mols.len() });
    }
    let split = fold_split(mols.len(), folds, seed);
    let per_fold: Vec<Result<[(f64, f64); 3], QsarError>> = split
        .par_iter()
        .map(|test| {
            let train: Vec<usize> = (0..mols.len()).filter(|i| test.binary_search(i).is_err()).collect();
            let train_mols: Vec<MolGraph> = train.iter().map(|&i| mols[i].clone()).collect();
            let train_y: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
            let vocab = Arc::new(build_fragment_vocabulary_with(&train_mols, vocab_params)?);
            let ens = train_ensemble(&train_mols, &train_y, vocab, params)?;
            let y_true: Vec<f64> = test.iter().map(|&i| labels[i]).collect();
            let mut out = [(0.0, 0.0); 3];
            for (slot, v) in out.iter_mut().zip(FeatureView::ALL) {
                let pred = test.iter().map(|&i| ens.predict_view(&mols[i], v)).collect::<Result<Vec<_>, _>>()?;
                *slot = regression_metrics(&y_true, &pred)?;
            }
            Ok(out)
        })
        .collect();
    let per_fold: Vec<[(f64, f64); 3]> = per_fold.into_iter().collect::<Result<_, _>>()?;
    let reports = FeatureView::ALL
        .iter()
        .enumerate()
        .map(|(k, &view)| {
            let fold_r2: Vec<f64> = per_fold.iter().map(|f| f[k].0).collect();
            let fold_rmse: Vec<f64> = per_fold.iter().map(|f| f[k].1).collect();
            CvReport {
                view,
                mean_r2: fold_r2.iter().sum::<f64>() / folds as f64,
                mean_rmse: fold_rmse.iter().sum::<f64>() / folds as f64,
                fold_r2,
                fold_rmse,
                fold_count: folds,
            }
        })
        .collect();
    Ok(CvSummary { reports, folds: split, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition() {
        let f = fold_split(23, 5, 9);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(f.iter().all(|x| x.len() == 4 || x.len() == 5));
        assert_eq!(f, fold_split(23, 5, 9));
    }
}
