use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::molgraph::{Element, MolGraph};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the bytes followed by the splitmix64 finalizer. Fixed by
/// definition, so identifiers agree on every platform.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// One atom-centred environment that survived deduplication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Environment {
    pub atom: usize,
    pub radius: u32,
    pub id: u64,
}

fn heavy_neighbors(mol: &MolGraph, a: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    mol.neighbors(a)
        .iter()
        .copied()
        .filter(move |&(v, _)| mol.atoms()[v].element != Element::H)
}

/// Radius-0 identifier: element, heavy degree, total H, charge, aromatic
/// flag, ring flag.
fn initial_id(mol: &MolGraph, a: usize) -> u64 {
    let atom = &mol.atoms()[a];
    let bytes = [
        0u8,
        atom.element.atomic_number(),
        heavy_neighbors(mol, a).count() as u8,
        mol.total_h_count(a) as u8,
        atom.formal_charge as u8,
        atom.is_aromatic as u8,
        mol.is_ring_atom(a) as u8,
    ];
    stable_hash(&bytes)
}

/// Circular environments up to `radius`, in radius-major then atom order.
///
/// An environment is kept only if its bond set is new: atoms whose
/// neighbourhood stopped growing drop out, and when several atoms cover the
/// same bonds at one radius the smallest identifier is kept. Hydrogen graph
/// nodes are skipped.
pub fn circular_environments(mol: &MolGraph, radius: u32) -> Vec<Environment> {
    let n = mol.atom_count();
    let heavy: Vec<usize> = (0..n).filter(|&a| mol.atoms()[a].element != Element::H).collect();
    let mut ids: Vec<u64> = vec![0; n];
    let mut out = Vec::new();
    for &a in &heavy {
        ids[a] = initial_id(mol, a);
        out.push(Environment { atom: a, radius: 0, id: ids[a] });
    }
    let mut alive = vec![false; n];
    for &a in &heavy {
        alive[a] = true;
    }
    // atoms reached so far and bonds covered, per centre
    let mut reached: Vec<Vec<usize>> = (0..n).map(|a| vec![a]).collect();
    let mut covered: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut seen_sets: HashSet<Vec<usize>> = HashSet::new();
    seen_sets.insert(Vec::new());

    for r in 1..=radius {
        let mut round: Vec<(Vec<usize>, u64, usize)> = Vec::new();
        let mut next_ids = ids.clone();
        for &a in &heavy {
            if !alive[a] {
                continue;
            }
            let mut nb: Vec<(u8, u64)> = heavy_neighbors(mol, a)
                .map(|(v, b)| (mol.bonds()[b].order.code(), ids[v]))
                .collect();
            nb.sort_unstable();
            let mut bytes = Vec::with_capacity(10 + nb.len() * 9);
            bytes.push(r as u8);
            bytes.extend_from_slice(&ids[a].to_le_bytes());
            bytes.push(nb.len() as u8);
            for (code, id) in &nb {
                bytes.push(*code);
                bytes.extend_from_slice(&id.to_le_bytes());
            }
            next_ids[a] = stable_hash(&bytes);

            let mut bonds = covered[a].clone();
            let mut new_atoms = Vec::new();
            for &v in &reached[a] {
                for (w, b) in heavy_neighbors(mol, v) {
                    if !bonds.contains(&b) {
                        bonds.push(b);
                    }
                    if !reached[a].contains(&w) && !new_atoms.contains(&w) {
                        new_atoms.push(w);
                    }
                }
            }
            bonds.sort_unstable();
            let grew = bonds.len() > covered[a].len();
            covered[a] = bonds.clone();
            reached[a].extend(new_atoms);
            if !grew {
                alive[a] = false;
                continue;
            }
            round.push((bonds, next_ids[a], a));
        }
        ids = next_ids;
        round.sort();
        let mut emitted: Vec<Environment> = Vec::new();
        for (bonds, id, a) in round {
            if seen_sets.contains(&bonds) {
                alive[a] = false;
                continue;
            }
            seen_sets.insert(bonds);
            emitted.push(Environment { atom: a, radius: r, id });
        }
        emitted.sort_by_key(|e| e.atom);
        out.extend(emitted);
        if !alive.iter().any(|&x| x) {
            break;
        }
    }
    out
}

/// Fixed-length bit vector of folded environment identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    words: Vec<u64>,
    nbits: usize,
    radius: u32,
    set_count: u32,
}

impl Fingerprint {
    pub fn empty(nbits: usize, radius: u32) -> Result<Self, FeatureError> {
        if nbits == 0 || !nbits.is_power_of_two() {
            return Err(FeatureError::InvalidParameter(format!("fingerprint length {nbits} is not a power of two")));
        }
        Ok(Fingerprint { words: vec![0; nbits.div_ceil(64)], nbits, radius, set_count: 0 })
    }

    pub fn from_bits(nbits: usize, radius: u32, bits: impl IntoIterator<Item = usize>) -> Result<Self, FeatureError> {
        let mut fp = Fingerprint::empty(nbits, radius)?;
        for b in bits {
            if b >= nbits {
                return Err(FeatureError::InvalidParameter(format!("bit {b} out of range for length {nbits}")));
            }
            fp.set(b);
        }
        Ok(fp)
    }

    fn set(&mut self, bit: usize) {
        let (w, m) = (bit / 64, 1u64 << (bit % 64));
        if self.words[w] & m == 0 {
            self.words[w] |= m;
            self.set_count += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.nbits
    }

    pub fn is_empty(&self) -> bool {
        self.set_count == 0
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn count_ones(&self) -> u32 {
        self.set_count
    }

    pub fn contains(&self, bit: usize) -> bool {
        bit < self.nbits && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(move |&b| self.contains(b))
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    /// Every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Fingerprint) -> bool {
        self.nbits == other.nbits && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Lowercase hex, most significant word first.
    pub fn to_hex(&self) -> String {
        self.words.iter().rev().map(|w| format!("{w:016x}")).collect()
    }

    pub fn from_hex(hex_text: &str, radius: u32) -> Result<Self, FeatureError> {
        let bad = || FeatureError::InvalidParameter("malformed fingerprint hex".into());
        if hex_text.len() % 16 != 0 || hex_text.is_empty() {
            return Err(bad());
        }
        let mut words = Vec::new();
        for chunk in hex_text.as_bytes().chunks(16).rev() {
            let s = std::str::from_utf8(chunk).map_err(|_| bad())?;
            words.push(u64::from_str_radix(s, 16).map_err(|_| bad())?);
        }
        let nbits = words.len() * 64;
        let set_count = words.iter().map(|w| w.count_ones()).sum();
        let fp = Fingerprint { words, nbits, radius, set_count };
        if !nbits.is_power_of_two() {
            return Err(bad());
        }
        Ok(fp)
    }

    /// Dense 0/1 vector, for models.
    pub fn to_dense(&self) -> Vec<f64> {
        (0..self.nbits).map(|b| if self.contains(b) { 1.0 } else { 0.0 }).collect()
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Circular fingerprint of a single-fragment molecule.
///
/// ```
/// use leadopt::features::circular_fingerprint;
/// use leadopt::molgraph::parse_smiles;
/// let methane = parse_smiles("C").unwrap();
/// assert_eq!(circular_fingerprint(&methane, 3, 2048).unwrap().count_ones(), 1);
/// ```
pub fn circular_fingerprint(mol: &MolGraph, radius: u32, nbits: usize) -> Result<Fingerprint, FeatureError> {
    if !mol.is_single_fragment() {
        return Err(FeatureError::MultiFragmentInput);
    }
    let mut fp = Fingerprint::empty(nbits, radius)?;
    for env in circular_environments(mol, radius) {
        fp.set((env.id % nbits as u64) as usize);
    }
    Ok(fp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn hash_is_fixed() {
        // FNV-1a of the empty string is the offset basis; the finalizer is then applied.
        let mut h = FNV_OFFSET;
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        assert_eq!(stable_hash(&[]), h ^ (h >> 31));
    }

    #[test]
    fn hex_round_trip() {
        let m = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        let fp = circular_fingerprint(&m, 2, 1024).unwrap();
        let back = Fingerprint::from_hex(&fp.to_hex(), 2).unwrap();
        assert_eq!(back, fp);
    }

    #[test]
    fn multi_fragment_rejected() {
        let m = parse_smiles("CC.O").unwrap();
        assert!(matches!(circular_fingerprint(&m, 2, 2048), Err(FeatureError::MultiFragmentInput)));
    }
}
