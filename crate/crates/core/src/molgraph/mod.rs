//! Molecular graphs parsed from SMILES.
//!
//! [`parse_smiles`] builds a valence-checked [`MolGraph`] with perceived rings,
//! Hückel aromaticity and hydrogen counts. [`to_canonical`] writes a SMILES
//! string that depends only on the molecule, not on the input atom order, so
//! canonical strings can be compared directly for deduplication.

mod aromaticity;
mod canon;
pub mod edit;
mod element;
mod parser;
mod rings;
mod writer;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use canon::{canonical_ranks, symmetry_classes};
pub use element::Element;
pub use parser::{parse_smiles, parse_smiles_bytes, SmilesError, SyntaxIssue, ValenceIssue};
pub use writer::{random_smiles, write_smiles_with_ranks};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Small integer code used by hashing and canonical invariants.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// Directional bond marks (`/`, `\`). Kept as annotations only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondStereo {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub index: usize,
    pub element: Element,
    pub is_aromatic: bool,
    pub formal_charge: i8,
    /// Hydrogens attached to this atom that are not graph nodes, whether
    /// implied by valence or written inside a bracket atom.
    pub implicit_h_count: u8,
    pub isotope: Option<u16>,
    /// Raw chirality tag (`@`, `@@`, ...) as written. Not used by any computation.
    pub chirality: Option<String>,
    /// Character offset of the atom in the source SMILES.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
    /// Order in one Kekulé structure (1, 2 or 3); equals `order` for
    /// non-aromatic bonds.
    pub kekule_order: u8,
    pub stereo: Option<BondStereo>,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

/// A perceived ring: atoms in cycle order plus the bonds closing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    pub atoms: Vec<usize>,
    pub bonds: Vec<usize>,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    rings: Vec<Ring>,
    adjacency: Vec<Vec<(usize, usize)>>,
    bond_in_ring: Vec<bool>,
    atom_ring_count: Vec<u8>,
}

impl MolGraph {
    pub(crate) fn assemble(atoms: Vec<Atom>, bonds: Vec<Bond>, rings: Vec<Ring>) -> MolGraph {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, b) in bonds.iter().enumerate() {
            adjacency[b.begin].push((b.end, i));
            adjacency[b.end].push((b.begin, i));
        }
        let mut bond_in_ring = vec![false; bonds.len()];
        let mut atom_ring_count = vec![0u8; atoms.len()];
        for ring in &rings {
            for &b in &ring.bonds {
                bond_in_ring[b] = true;
            }
            for &a in &ring.atoms {
                atom_ring_count[a] = atom_ring_count[a].saturating_add(1);
            }
        }
        MolGraph {
            atoms,
            bonds,
            rings,
            adjacency,
            bond_in_ring,
            atom_ring_count,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Smallest set of smallest rings.
    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Atoms other than hydrogen that appear as graph nodes.
    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element != Element::H).count()
    }

    /// `(neighbour, bond index)` pairs of an atom.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|&(_, bond)| bond)
    }

    pub fn is_ring_bond(&self, bond: usize) -> bool {
        self.bond_in_ring[bond]
    }

    pub fn is_ring_atom(&self, atom: usize) -> bool {
        self.atom_ring_count[atom] > 0
    }

    /// Number of SSSR rings containing the atom.
    pub fn ring_membership(&self, atom: usize) -> usize {
        self.atom_ring_count[atom] as usize
    }

    /// Sum of Kekulé bond orders at an atom (hydrogens excluded).
    pub fn bond_order_sum(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, b)| self.bonds[b].kekule_order as u32)
            .sum()
    }

    pub fn total_h_count(&self, atom: usize) -> u32 {
        let explicit = self.adjacency[atom]
            .iter()
            .filter(|&&(n, _)| self.atoms[n].element == Element::H)
            .count() as u32;
        self.atoms[atom].implicit_h_count as u32 + explicit
    }

    /// Connected components as sorted atom index lists, ordered by their
    /// smallest atom index.
    pub fn fragments(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                let a = comp[i];
                for &(nb, _) in &self.adjacency[a] {
                    if !seen[nb] {
                        seen[nb] = true;
                        comp.push(nb);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn fragment_count(&self) -> usize {
        self.fragments().len()
    }

    pub fn is_single_fragment(&self) -> bool {
        self.fragment_count() == 1
    }

    /// Counts of each element including implicit hydrogens.
    pub fn element_counts(&self) -> BTreeMap<Element, u32> {
        let mut counts = BTreeMap::new();
        for atom in &self.atoms {
            *counts.entry(atom.element).or_insert(0) += 1;
            if atom.implicit_h_count > 0 {
                *counts.entry(Element::H).or_insert(0) += atom.implicit_h_count as u32;
            }
        }
        counts
    }
}

/// SMILES text in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalSmiles(String);

impl CanonicalSmiles {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for CanonicalSmiles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for CanonicalSmiles {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Canonical SMILES of a molecule. Stereo marks and atom classes are not
/// written; isotopes and charges are.
pub fn to_canonical(mol: &MolGraph) -> CanonicalSmiles {
    let ranks = canonical_ranks(mol);
    CanonicalSmiles(write_smiles_with_ranks(mol, &ranks))
}

/// Parses and canonicalizes in one step.
pub fn canonicalize(smiles: &str) -> Result<CanonicalSmiles, SmilesError> {
    parse_smiles(smiles).map(|m| to_canonical(&m))
}

/// Hill-order formula, hydrogens included.
pub fn molecular_formula(mol: &MolGraph) -> String {
    let counts = mol.element_counts();
    let mut out = String::new();
    let push = |out: &mut String, e: Element, n: u32| {
        out.push_str(e.symbol());
        if n > 1 {
            out.push_str(&n.to_string());
        }
    };
    let has_carbon = counts.contains_key(&Element::C);
    if has_carbon {
        push(&mut out, Element::C, counts[&Element::C]);
        if let Some(&h) = counts.get(&Element::H) {
            push(&mut out, Element::H, h);
        }
    }
    let mut rest: Vec<(Element, u32)> = counts
        .iter()
        .filter(|(e, _)| !has_carbon || (**e != Element::C && **e != Element::H))
        .map(|(e, n)| (*e, *n))
        .collect();
    rest.sort_by(|a, b| a.0.symbol().cmp(b.0.symbol()));
    for (e, n) in rest {
        push(&mut out, e, n);
    }
    out
}
