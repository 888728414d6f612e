//! Fréchet distance between two molecule sets, each summarised by the mean
//! and covariance of its feature vectors (embedding followed by z-scored
//! descriptors).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::features::{descriptor_vector, mol2vec_embed, FragmentVocabulary};
use crate::molgraph::MolGraph;

/// Ridge added to both covariances before the matrix square root.
pub const FRECHET_EPSILON: f64 = 1e-6;

/// Descriptor standardisation fitted on a reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrechetSpace {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FrechetSpace {
    pub fn fit(mols: &[MolGraph]) -> Result<Self, CampaignError> {
        if mols.is_empty() {
            return Err(CampaignError::TooFewSamples { needed: 1, available: 0 });
        }
        let rows = mols.iter().map(|m| Ok(descriptor_vector(m)?.values)).collect::<Result<Vec<_>, CampaignError>>()?;
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|j| {
                let sd = (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(FrechetSpace { mean, scale })
    }

    pub fn features(&self, mol: &MolGraph, vocab: &FragmentVocabulary) -> Result<Vec<f64>, CampaignError> {
        let mut v = mol2vec_embed(mol, vocab)?.values;
        let d = descriptor_vector(mol)?.values;
        v.extend(d.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s));
        Ok(v)
    }
}

fn moments(rows: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = rows.len();
    let d = rows[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mu = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
    let centred = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mu[j]);
    let mut cov = centred.transpose() * &centred / (n - 1) as f64;
    for k in 0..d {
        cov[(k, k)] += FRECHET_EPSILON;
    }
    (mu, cov)
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Squared Fréchet distance between Gaussians fitted to two sets of
/// feature vectors: `|μa−μb|² + Tr(Σa + Σb − 2(ΣaΣb)^½)`. The trace of the
/// product root is taken as `Tr((Σa^½ Σb Σa^½)^½)`, which only needs
/// symmetric eigendecompositions.
pub fn frechet_distance_features(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, CampaignError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(CampaignError::TooFewSamples { needed: 2, available: s.len() });
        }
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|r| r.len() != d) {
        return Err(CampaignError::InvalidInput("feature vectors differ in length".into()));
    }
    let (mu_a, cov_a) = moments(a);
    let (mu_b, cov_b) = moments(b);
    let root_a = psd_sqrt(&cov_a);
    let inner = &root_a * &cov_b * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let tr_root: f64 = SymmetricEigen::new(inner).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let d2 = (&mu_a - &mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * tr_root;
    Ok(d2.max(0.0))
}

/// Fréchet distance between two molecule sets. Descriptors are standardised
/// on the union of both sets so the result is symmetric.
pub fn frechet_distance(a: &[MolGraph], b: &[MolGraph], vocab: &FragmentVocabulary) -> Result<f64, CampaignError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(CampaignError::TooFewSamples { needed: 2, available: s.len() });
        }
    }
    let union: Vec<MolGraph> = a.iter().chain(b).cloned().collect();
    let space = FrechetSpace::fit(&union)?;
    let fa = a.iter().map(|m| space.features(m, vocab)).collect::<Result<Vec<_>, _>>()?;
    let fb = b.iter().map(|m| space.features(m, vocab)).collect::<Result<Vec<_>, _>>()?;
    frechet_distance_features(&fa, &fb)
}
