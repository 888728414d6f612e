//! Boosted-tree activity models over the three feature views, their
//! consensus, and cross-validation.

mod cv;
mod ensemble;
mod gbt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, VocabError};

pub use cv::{cross_validate, fold_split, CvReport, CvSummary};
pub use ensemble::{consensus_predict, featurize_view, train_ensemble, Consensus, EnsemblePredictor};
pub use gbt::{train_gbt, GbtModel, GbtParams, Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureView {
    Fingerprint,
    Descriptor,
    Embedding,
}

impl FeatureView {
    pub const ALL: [FeatureView; 3] = [FeatureView::Fingerprint, FeatureView::Descriptor, FeatureView::Embedding];

    pub fn name(self) -> &'static str {
        match self {
            FeatureView::Fingerprint => "fingerprint",
            FeatureView::Descriptor => "descriptor",
            FeatureView::Embedding => "embedding",
        }
    }
}

#[derive(Debug, Error)]
pub enum QsarError {
    #[error("need at least {needed} samples, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("R² is undefined: observed values have zero variance")]
    ZeroVariance,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// Coefficient of determination and root mean squared error.
///
/// ```
/// let (r2, rmse) = leadopt::qsar::regression_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap();
/// assert!((rmse - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
/// assert!(r2 < 1.0);
/// ```
pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<(f64, f64), QsarError> {
    if y_true.len() != y_pred.len() {
        return Err(QsarError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(QsarError::InsufficientData { needed: 1, available: 0 });
    }
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    let rmse = (ss_res / n).sqrt();
    if ss_tot == 0.0 {
        return Err(QsarError::ZeroVariance);
    }
    Ok((1.0 - ss_res / ss_tot, rmse))
}
