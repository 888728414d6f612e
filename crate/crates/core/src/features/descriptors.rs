use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::molgraph::{BondOrder, Element, MolGraph};
use crate::properties::{crippen_logp, ertl_tpsa, molecular_weight};

pub const DESCRIPTOR_SCHEMA: &str = "leadopt-desc-v1";

pub const DESCRIPTOR_NAMES: [&str; 11] = [
    "molecular_weight",
    "logp",
    "tpsa",
    "heavy_atoms",
    "rings",
    "aromatic_rings",
    "heteroatoms",
    "hbond_donors",
    "hbond_acceptors",
    "rotatable_bonds",
    "fraction_sp3",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorVector {
    pub values: Vec<f64>,
    pub schema_id: String,
}

impl DescriptorVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        DESCRIPTOR_NAMES.iter().position(|n| *n == name).and_then(|i| self.values.get(i).copied())
    }
}

fn is_heavy(mol: &MolGraph, a: usize) -> bool {
    mol.atoms()[a].element != Element::H
}

fn heavy_degree(mol: &MolGraph, a: usize) -> usize {
    mol.neighbors(a).iter().filter(|&&(v, _)| is_heavy(mol, v)).count()
}

fn has_triple(mol: &MolGraph, a: usize) -> bool {
    mol.neighbors(a).iter().any(|&(_, b)| mol.bonds()[b].order == BondOrder::Triple)
}

fn rotatable_bonds(mol: &MolGraph) -> usize {
    mol.bonds()
        .iter()
        .enumerate()
        .filter(|&(i, b)| {
            b.order == BondOrder::Single
                && !mol.is_ring_bond(i)
                && is_heavy(mol, b.begin)
                && is_heavy(mol, b.end)
                && heavy_degree(mol, b.begin) > 1
                && heavy_degree(mol, b.end) > 1
                && !has_triple(mol, b.begin)
                && !has_triple(mol, b.end)
        })
        .count()
}

fn fraction_sp3(mol: &MolGraph) -> f64 {
    let carbons: Vec<usize> = (0..mol.atom_count()).filter(|&a| mol.atoms()[a].element == Element::C).collect();
    if carbons.is_empty() {
        return 0.0;
    }
    let sp3 = carbons
        .iter()
        .filter(|&&a| {
            !mol.atoms()[a].is_aromatic && mol.neighbors(a).iter().all(|&(_, b)| mol.bonds()[b].order == BondOrder::Single)
        })
        .count();
    sp3 as f64 / carbons.len() as f64
}

/// The eleven descriptors of [`DESCRIPTOR_NAMES`], in that order.
pub fn descriptor_vector(mol: &MolGraph) -> Result<DescriptorVector, FeatureError> {
    if !mol.is_single_fragment() {
        return Err(FeatureError::MultiFragmentInput);
    }
    let atoms = mol.atoms();
    let heavy = (0..atoms.len()).filter(|&a| is_heavy(mol, a));
    let aromatic_rings = mol
        .rings()
        .iter()
        .filter(|r| r.bonds.iter().all(|&b| mol.bonds()[b].order == BondOrder::Aromatic))
        .count();
    let hetero = heavy.clone().filter(|&a| atoms[a].element != Element::C).count();
    let n_or_o = |a: &usize| matches!(atoms[*a].element, Element::N | Element::O);
    let donors = heavy.clone().filter(n_or_o).filter(|&a| mol.total_h_count(a) > 0).count();
    let acceptors = heavy.clone().filter(n_or_o).count();
    let values = vec![
        molecular_weight(mol),
        crippen_logp(mol)?,
        ertl_tpsa(mol),
        mol.heavy_atom_count() as f64,
        mol.rings().len() as f64,
        aromatic_rings as f64,
        hetero as f64,
        donors as f64,
        acceptors as f64,
        rotatable_bonds(mol) as f64,
        fraction_sp3(mol),
    ];
    Ok(DescriptorVector { values, schema_id: DESCRIPTOR_SCHEMA.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn desc(s: &str) -> DescriptorVector {
        descriptor_vector(&parse_smiles(s).unwrap()).unwrap()
    }

    #[test]
    fn methane() {
        let d = desc("C");
        assert!((d.get("molecular_weight").unwrap() - 16.043).abs() < 0.01);
        assert_eq!(d.get("rings"), Some(0.0));
        assert_eq!(d.get("fraction_sp3"), Some(1.0));
        assert_eq!(d.values.len(), DESCRIPTOR_NAMES.len());
    }

    #[test]
    fn benzene() {
        let d = desc("c1ccccc1");
        assert_eq!(d.get("aromatic_rings"), Some(1.0));
        assert_eq!(d.get("heteroatoms"), Some(0.0));
        assert_eq!(d.get("fraction_sp3"), Some(0.0));
    }

    #[test]
    fn counts_on_small_drug() {
        // N-butylacetamide: one donor N, two acceptor atoms, four rotatable bonds.
        let d = desc("CCCCNC(C)=O");
        assert_eq!(d.get("hbond_donors"), Some(1.0));
        assert_eq!(d.get("hbond_acceptors"), Some(2.0));
        assert_eq!(d.get("rotatable_bonds"), Some(4.0));
        assert_eq!(d.get("heavy_atoms"), Some(8.0));
    }
}
