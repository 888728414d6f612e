use crate::molgraph::{BondOrder, Element, MolGraph};

/// One row of the fragment table. `None` fields are wildcards.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TpsaRow {
    pub element: Element,
    pub fields: [Option<i32>; 9],
    pub pattern: String,
    pub value: f64,
}

/// The atom state compared against table keys, in key order after the
/// element: aromatic, charge, H, heavy neighbours, single, double, triple,
/// aromatic bonds, in 3-ring.
pub(crate) fn atom_state(mol: &MolGraph, a: usize) -> [i32; 9] {
    let atom = &mol.atoms()[a];
    let mut counts = [0i32; 4];
    let mut heavy = 0;
    for &(v, b) in mol.neighbors(a) {
        if mol.atoms()[v].element == Element::H {
            continue;
        }
        heavy += 1;
        let k = match mol.bonds()[b].order {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        };
        counts[k] += 1;
    }
    let in3 = mol.rings().iter().any(|r| r.len() == 3 && r.atoms.contains(&a));
    [
        atom.is_aromatic as i32,
        atom.formal_charge as i32,
        mol.total_h_count(a) as i32,
        heavy,
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        in3 as i32,
    ]
}

pub(crate) fn parse_key(key: &str) -> Option<(Element, [Option<i32>; 9])> {
    let mut parts = key.split(':');
    let element = Element::from_symbol(parts.next()?)?;
    let mut fields = [None; 9];
    for f in fields.iter_mut() {
        let p = parts.next()?;
        *f = if p == "*" { None } else { Some(p.parse().ok()?) };
    }
    if parts.next().is_some() {
        return None;
    }
    Some((element, fields))
}

pub(crate) fn contribution(rows: &[TpsaRow], mol: &MolGraph, a: usize, include_s_p: bool) -> Option<f64> {
    let element = mol.atoms()[a].element;
    let polar = element == Element::N
        || element == Element::O
        || (include_s_p && (element == Element::S || element == Element::P));
    if !polar {
        return Some(0.0);
    }
    let state = atom_state(mol, a);
    rows.iter()
        .find(|r| {
            r.element == element && r.fields.iter().zip(state.iter()).all(|(f, s)| f.is_none_or(|v| v == *s))
        })
        .map(|r| r.value)
}
