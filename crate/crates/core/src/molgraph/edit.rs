//! A mutable Kekulé graph for structural edits. Edits are written back to
//! SMILES and re-parsed, so every edited molecule passes the same checks as
//! parsed input.

use super::element::Element;
use super::writer::{plain_token, write_graph};
use super::{parse_smiles, MolGraph, SmilesError};

#[derive(Debug, Clone, PartialEq)]
pub struct EditAtom {
    pub element: Element,
    pub charge: i8,
    pub isotope: Option<u16>,
    /// `None` lets the parser derive hydrogens from valence.
    pub explicit_h: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditBond {
    pub a: usize,
    pub b: usize,
    /// 1, 2 or 3.
    pub order: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EditableMol {
    pub atoms: Vec<EditAtom>,
    pub bonds: Vec<EditBond>,
}

impl EditableMol {
    pub fn from_graph(mol: &MolGraph) -> Self {
        let atoms = mol
            .atoms()
            .iter()
            .map(|a| {
                let plain = a.formal_charge == 0 && a.isotope.is_none() && a.element.is_organic_subset();
                EditAtom {
                    element: a.element,
                    charge: a.formal_charge,
                    isotope: a.isotope,
                    explicit_h: if plain { None } else { Some(a.implicit_h_count) },
                }
            })
            .collect();
        let bonds = mol
            .bonds()
            .iter()
            .map(|b| EditBond { a: b.begin, b: b.end, order: b.kekule_order })
            .collect();
        EditableMol { atoms, bonds }
    }

    pub fn add_atom(&mut self, element: Element) -> usize {
        self.atoms.push(EditAtom { element, charge: 0, isotope: None, explicit_h: None });
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: u8) {
        self.bonds.push(EditBond { a, b, order });
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.bonds.iter().filter(|b| b.a == atom || b.b == atom).count()
    }

    pub fn bond_order_sum(&self, atom: usize) -> u32 {
        self.bonds
            .iter()
            .filter(|b| b.a == atom || b.b == atom)
            .map(|b| b.order as u32)
            .sum()
    }

    /// Removes an atom and its bonds, shifting later indices down by one.
    pub fn remove_atom(&mut self, atom: usize) {
        self.atoms.remove(atom);
        self.bonds.retain(|b| b.a != atom && b.b != atom);
        for b in &mut self.bonds {
            if b.a > atom {
                b.a -= 1;
            }
            if b.b > atom {
                b.b -= 1;
            }
        }
    }

    /// Kekulé SMILES in atom index order.
    pub fn to_smiles(&self) -> String {
        let tokens: Vec<String> = self
            .atoms
            .iter()
            .map(|a| plain_token(a.element, a.charge, a.isotope, a.explicit_h))
            .collect();
        let mut adjacency: Vec<Vec<(usize, &'static str)>> = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            let sym = match b.order {
                2 => "=",
                3 => "#",
                _ => "",
            };
            adjacency[b.a].push((b.b, sym));
            adjacency[b.b].push((b.a, sym));
        }
        let ranks: Vec<u32> = (0..self.atoms.len() as u32).collect();
        write_graph(&tokens, &adjacency, &ranks)
    }

    pub fn to_graph(&self) -> Result<MolGraph, SmilesError> {
        parse_smiles(&self.to_smiles())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{canonicalize, to_canonical};

    #[test]
    fn round_trip_through_edit_graph() {
        for s in ["c1ccccc1O", "CC(=O)Nc1ccc(O)cc1", "C[N+](C)(C)C", "c1cc[nH]c1"] {
            let m = parse_smiles(s).unwrap();
            let e = EditableMol::from_graph(&m);
            assert_eq!(to_canonical(&e.to_graph().unwrap()), to_canonical(&m), "{s}");
        }
    }

    #[test]
    fn add_and_remove() {
        let m = parse_smiles("c1ccccc1").unwrap();
        let mut e = EditableMol::from_graph(&m);
        let o = e.add_atom(Element::O);
        e.add_bond(0, o, 1);
        assert_eq!(canonicalize(&e.to_smiles()).unwrap(), canonicalize("Oc1ccccc1").unwrap());
        e.remove_atom(o);
        assert_eq!(canonicalize(&e.to_smiles()).unwrap(), canonicalize("c1ccccc1").unwrap());
    }
}
