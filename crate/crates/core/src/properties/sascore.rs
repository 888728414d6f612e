use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::PropertyError;
use crate::features::{fragment_tokens, FragmentVocabulary, SaCalibration};
use crate::molgraph::{symmetry_classes, Element, MolGraph};

/// Score given to a fragment absent from the reference corpus.
const UNKNOWN_FRAGMENT: f64 = -4.0;

/// The terms of the raw synthetic-accessibility score. Penalties are stored
/// as non-negative numbers and subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaComponents {
    pub fragment_score: f64,
    pub size_penalty: f64,
    pub stereo_penalty: f64,
    pub spiro_penalty: f64,
    pub bridgehead_penalty: f64,
    pub macrocycle_penalty: f64,
    pub symmetry_correction: f64,
    pub raw: f64,
}

impl SaComponents {
    pub fn from_terms(
        fragment_score: f64,
        size_penalty: f64,
        stereo_penalty: f64,
        spiro_penalty: f64,
        bridgehead_penalty: f64,
        macrocycle_penalty: f64,
        symmetry_correction: f64,
    ) -> Self {
        let raw = fragment_score
            - (size_penalty + stereo_penalty + spiro_penalty + bridgehead_penalty + macrocycle_penalty)
            + symmetry_correction;
        SaComponents {
            fragment_score,
            size_penalty,
            stereo_penalty,
            spiro_penalty,
            bridgehead_penalty,
            macrocycle_penalty,
            symmetry_correction,
            raw,
        }
    }

    pub fn score(&self, cal: &SaCalibration) -> f64 {
        rescale_sa(self.raw, cal.lo, cal.hi)
    }
}

/// Maps a raw score onto `[1, 10]`: `lo` lands near 10, `hi` near 1, and
/// the top of the scale is compressed logarithmically above 8.
pub fn rescale_sa(raw: f64, lo: f64, hi: f64) -> f64 {
    let mut s = 11.0 - (raw - lo + 1.0) / (hi - lo) * 9.0;
    if s > 8.0 {
        s = 8.0 + (s - 7.0).ln();
    }
    s.clamp(1.0, 10.0)
}

fn heavy(mol: &MolGraph, a: usize) -> bool {
    mol.atoms()[a].element != Element::H
}

/// sp3 carbons with four distinct substituents, plus any atom carrying an
/// explicit chirality mark.
fn stereo_centres(mol: &MolGraph) -> usize {
    let classes = symmetry_classes(mol);
    (0..mol.atom_count())
        .filter(|&a| {
            let atom = &mol.atoms()[a];
            if atom.chirality.is_some() {
                return true;
            }
            if atom.element != Element::C || atom.is_aromatic || mol.bond_order_sum(a) + atom.implicit_h_count as u32 != 4 {
                return false;
            }
            let h = mol.total_h_count(a);
            if h > 1 || mol.degree(a) + atom.implicit_h_count as usize != 4 {
                return false;
            }
            let mut seen = BTreeSet::new();
            let mut distinct = true;
            for &(v, _) in mol.neighbors(a) {
                let key = if heavy(mol, v) { Some(classes[v]) } else { None };
                distinct &= seen.insert(key);
            }
            if atom.implicit_h_count > 0 {
                distinct &= seen.insert(None);
            }
            distinct
        })
        .count()
}

fn ring_pairs(mol: &MolGraph) -> (usize, usize) {
    let rings = mol.rings();
    let mut spiro = BTreeSet::new();
    let mut bridgeheads = BTreeSet::new();
    for i in 0..rings.len() {
        for j in i + 1..rings.len() {
            let shared: Vec<usize> = rings[i].atoms.iter().copied().filter(|a| rings[j].atoms.contains(a)).collect();
            if shared.len() == 1 {
                spiro.insert(shared[0]);
                continue;
            }
            let shared_bonds = rings[i].bonds.iter().filter(|b| rings[j].bonds.contains(b)).count();
            if shared_bonds < 2 {
                continue;
            }
            // endpoints of the shared path touch a non-shared atom of either ring
            for &a in &shared {
                let touches_outside = mol.neighbors(a).iter().any(|&(v, _)| {
                    !shared.contains(&v) && (rings[i].atoms.contains(&v) || rings[j].atoms.contains(&v))
                });
                if touches_outside {
                    bridgeheads.insert(a);
                }
            }
        }
    }
    (spiro.len(), bridgeheads.len())
}

/// Raw score terms given the molecule's fragment tokens, a count lookup and
/// the frequency anchor.
pub(crate) fn raw_sa_components(
    mol: &MolGraph,
    tokens: &[u64],
    count: impl Fn(u64) -> Option<u64>,
    anchor: f64,
) -> SaComponents {
    let fragment_score = if tokens.is_empty() {
        UNKNOWN_FRAGMENT
    } else {
        tokens
            .iter()
            .map(|&t| count(t).map_or(UNKNOWN_FRAGMENT, |c| (c as f64 / anchor).log10()))
            .sum::<f64>()
            / tokens.len() as f64
    };
    let n = (0..mol.atom_count()).filter(|&a| heavy(mol, a)).count() as f64;
    let size = n.powf(1.005) - n;
    let stereo = ((stereo_centres(mol) + 1) as f64).log10();
    let (spiro_n, bridge_n) = ring_pairs(mol);
    let spiro = ((spiro_n + 1) as f64).log10();
    let bridge = ((bridge_n + 1) as f64).log10();
    let macrocycle = if mol.rings().iter().any(|r| r.len() > 8) { 2f64.log10() } else { 0.0 };
    let distinct: BTreeSet<u64> = tokens.iter().copied().collect();
    let symmetry = if !distinct.is_empty() && n > distinct.len() as f64 {
        0.5 * (n / distinct.len() as f64).ln()
    } else {
        0.0
    };
    SaComponents::from_terms(fragment_score, size, stereo, spiro, bridge, macrocycle, symmetry)
}

pub fn sa_components(mol: &MolGraph, vocab: &FragmentVocabulary) -> Result<SaComponents, PropertyError> {
    if vocab.is_empty() {
        return Err(PropertyError::EmptyVocabulary);
    }
    let tokens = fragment_tokens(mol, vocab.radius());
    Ok(raw_sa_components(mol, &tokens, |t| vocab.count(t), vocab.sa_calibration().anchor))
}

/// Synthetic accessibility in `[1, 10]`, lower meaning easier, from the
/// fragment statistics and rescale anchors stored in `vocab`.
pub fn sa_score(mol: &MolGraph, vocab: &FragmentVocabulary) -> Result<f64, PropertyError> {
    Ok(sa_components(mol, vocab)?.score(&vocab.sa_calibration()))
}
