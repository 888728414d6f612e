//! Molecular weight, Crippen logP, Ertl tPSA and SA score, plus the
//! condition checks built on them.

mod conditions;
mod crippen;
pub(crate) mod sascore;
mod tables;
mod tpsa;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FragmentVocabulary;
use crate::molgraph::{Element, MolGraph};

pub use conditions::{check_conditions, ConditionKind, ConditionOutcome, ConditionReport, ConditionSpec, Property};
pub use sascore::{rescale_sa, sa_components, sa_score, SaComponents};
pub use tables::{PropertyTables, TableError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropertyError {
    #[error("atom {index} ({element}) matches no Crippen type")]
    UnclassifiableAtom { index: usize, element: Element },
    #[error("fragment vocabulary is empty")]
    EmptyVocabulary,
}

/// The four properties the conditions refer to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyProfile {
    pub molecular_weight: f64,
    pub logp: f64,
    pub tpsa: f64,
    pub sa_score: f64,
}

impl PropertyProfile {
    pub fn get(&self, p: Property) -> Option<f64> {
        match p {
            Property::MolecularWeight => Some(self.molecular_weight),
            Property::Logp => Some(self.logp),
            Property::Tpsa => Some(self.tpsa),
            Property::SaScore => Some(self.sa_score),
            Property::Activity => None,
        }
    }

    /// `other − self`, field by field.
    pub fn delta_to(&self, other: &PropertyProfile) -> PropertyProfile {
        PropertyProfile {
            molecular_weight: other.molecular_weight - self.molecular_weight,
            logp: other.logp - self.logp,
            tpsa: other.tpsa - self.tpsa,
            sa_score: other.sa_score - self.sa_score,
        }
    }
}

/// Sum of standard atomic weights, implicit hydrogens included.
///
/// ```
/// use leadopt::molgraph::parse_smiles;
/// let water = parse_smiles("O").unwrap();
/// assert!((leadopt::properties::molecular_weight(&water) - 18.015).abs() < 0.01);
/// ```
pub fn molecular_weight(mol: &MolGraph) -> f64 {
    let h = Element::H.weight();
    mol.atoms()
        .iter()
        .map(|a| a.element.weight() + a.implicit_h_count as f64 * h)
        .sum()
}

/// Crippen logP with the embedded table.
pub fn crippen_logp(mol: &MolGraph) -> Result<f64, PropertyError> {
    PropertyTables::embedded().crippen_logp(mol)
}

/// Ertl tPSA over N and O with the embedded table.
pub fn ertl_tpsa(mol: &MolGraph) -> f64 {
    PropertyTables::embedded().tpsa(mol, false)
}

/// tPSA with S and P contributions included.
pub fn ertl_tpsa_ext(mol: &MolGraph) -> f64 {
    PropertyTables::embedded().tpsa(mol, true)
}

pub fn property_profile(mol: &MolGraph, vocab: &FragmentVocabulary) -> Result<PropertyProfile, PropertyError> {
    Ok(PropertyProfile {
        molecular_weight: molecular_weight(mol),
        logp: crippen_logp(mol)?,
        tpsa: ertl_tpsa(mol),
        sa_score: sa_score(mol, vocab)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn mol(s: &str) -> MolGraph {
        parse_smiles(s).unwrap()
    }

    #[test]
    fn weights() {
        // IUPAC conventional weights: H 1.008, C 12.011, O 15.999
        assert!((molecular_weight(&mol("O")) - (15.999 + 2.0 * 1.008)).abs() < 1e-9);
        assert!((molecular_weight(&mol("C")) - 16.043).abs() < 0.01);
        assert!((molecular_weight(&mol("c1ccccc1")) - 78.11).abs() < 0.02);
    }

    #[test]
    fn tpsa_values() {
        assert_eq!(ertl_tpsa(&mol("CCCCCC")), 0.0);
        assert!((ertl_tpsa(&mol("CCO")) - 20.23).abs() < 0.01);
        assert!((ertl_tpsa(&mol("c1ccncc1")) - 12.89).abs() < 0.01);
        // acetamide: carbonyl O 17.07 + NH2 26.02
        assert!((ertl_tpsa(&mol("CC(N)=O")) - 43.09).abs() < 0.01);
    }

    #[test]
    fn tpsa_sulfur_extension() {
        let m = mol("CSC");
        assert_eq!(ertl_tpsa(&m), 0.0);
        assert!((ertl_tpsa_ext(&m) - 25.30).abs() < 0.01);
    }

    #[test]
    fn logp_benzene_is_six_aromatic_ch() {
        let t = PropertyTables::embedded();
        let expected = 6.0 * t.crippen_contribution("C18").unwrap() + 6.0 * t.crippen_contribution("H1").unwrap();
        assert_eq!(crippen_logp(&mol("c1ccccc1")).unwrap(), expected);
    }

    #[test]
    fn logp_ethanol_by_lookup() {
        let t = PropertyTables::embedded();
        let c = |n: &str| t.crippen_contribution(n).unwrap();
        // CH3 is C1, the CH2 bearing O is C3, the hydroxyl O is O2, carbon H is H1, hydroxyl H is H2.
        let expected = c("C1") + c("C3") + 5.0 * c("H1") + c("H2") + c("O2");
        assert!((crippen_logp(&mol("CCO")).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn unclassifiable() {
        let e = crippen_logp(&mol("[SiH4]")).unwrap_err();
        assert!(matches!(e, PropertyError::UnclassifiableAtom { index: 0, .. }));
    }
}
