use super::MolGraph;

/// Canonical atom ranks `0..n`, identical for isomorphic graphs regardless of
/// input order. Morgan-style refinement of atom invariants; ties left by
/// symmetry are broken by promoting one member of the lowest tied class and
/// refining again.
pub fn canonical_ranks(mol: &MolGraph) -> Vec<u32> {
    let n = mol.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let mut classes = symmetry_classes(mol);
    loop {
        let count = classes.iter().max().map_or(0, |m| m + 1) as usize;
        if count == n {
            break;
        }
        // lowest class with more than one member
        let mut sizes = vec![0usize; count];
        for &c in &classes {
            sizes[c as usize] += 1;
        }
        let tied = sizes.iter().position(|&s| s > 1).unwrap() as u32;
        let chosen = classes.iter().position(|&c| c == tied).unwrap();
        let keyed: Vec<(u32, u8)> = classes
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, if c == tied && i != chosen { 1 } else { 0 }))
            .collect();
        classes = refine(mol, dense_rank(&keyed));
    }
    classes
}

/// Symmetry classes: atoms in the same class are indistinguishable by the
/// refined invariants (topologically equivalent in practice).
pub fn symmetry_classes(mol: &MolGraph) -> Vec<u32> {
    if mol.atom_count() == 0 {
        return Vec::new();
    }
    refine(mol, dense_rank(&initial_invariants(mol)))
}

type Invariant = (u8, u16, i8, u8, usize, bool, bool);

fn initial_invariants(mol: &MolGraph) -> Vec<Invariant> {
    mol.atoms()
        .iter()
        .map(|a| {
            (
                a.element.atomic_number(),
                a.isotope.unwrap_or(0),
                a.formal_charge,
                a.implicit_h_count,
                mol.degree(a.index),
                a.is_aromatic,
                mol.is_ring_atom(a.index),
            )
        })
        .collect()
}

fn dense_rank<T: Ord + Clone>(keys: &[T]) -> Vec<u32> {
    let mut sorted: Vec<T> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter().map(|k| sorted.binary_search(k).unwrap() as u32).collect()
}

fn refine(mol: &MolGraph, mut classes: Vec<u32>) -> Vec<u32> {
    let mut count = classes.iter().max().map_or(0, |m| m + 1);
    loop {
        let keys: Vec<(u32, Vec<(u8, u32)>)> = (0..mol.atom_count())
            .map(|a| {
                let mut nb: Vec<(u8, u32)> = mol
                    .neighbors(a)
                    .iter()
                    .map(|&(v, b)| (mol.bonds()[b].order.code(), classes[v]))
                    .collect();
                nb.sort_unstable();
                (classes[a], nb)
            })
            .collect();
        let next = dense_rank(&keys);
        let next_count = next.iter().max().map_or(0, |m| m + 1);
        classes = next;
        if next_count == count {
            return classes;
        }
        count = next_count;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn ranks_are_a_permutation() {
        let m = parse_smiles("c1ccccc1C(=O)O").unwrap();
        let mut r = canonical_ranks(&m);
        r.sort();
        assert_eq!(r, (0..m.atom_count() as u32).collect::<Vec<_>>());
    }
}
