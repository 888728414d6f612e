use rand::seq::SliceRandom;
use rand::Rng;

use super::element::Element;
use super::{BondOrder, MolGraph};

/// Writes SMILES for `mol`, visiting atoms in the order given by `ranks`
/// (lower rank first). With canonical ranks this yields canonical SMILES;
/// with a random permutation it yields a random equivalent string.
pub fn write_smiles_with_ranks(mol: &MolGraph, ranks: &[u32]) -> String {
    let tokens: Vec<String> = (0..mol.atom_count()).map(|a| atom_token(mol, a)).collect();
    let adjacency: Vec<Vec<(usize, &'static str)>> = (0..mol.atom_count())
        .map(|a| {
            mol.neighbors(a)
                .iter()
                .map(|&(v, b)| (v, bond_symbol(mol, a, v, b)))
                .collect()
        })
        .collect();
    write_graph(&tokens, &adjacency, ranks)
}

/// A random, valid SMILES for the same molecule.
pub fn random_smiles<R: Rng + ?Sized>(mol: &MolGraph, rng: &mut R) -> String {
    let mut ranks: Vec<u32> = (0..mol.atom_count() as u32).collect();
    ranks.shuffle(rng);
    write_smiles_with_ranks(mol, &ranks)
}

fn bond_symbol(mol: &MolGraph, a: usize, b: usize, bond: usize) -> &'static str {
    match mol.bonds()[bond].order {
        BondOrder::Aromatic => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Single => {
            if mol.atoms()[a].is_aromatic && mol.atoms()[b].is_aromatic {
                "-"
            } else {
                ""
            }
        }
    }
}

/// Hydrogen count an unbracketed atom would get when re-parsed.
fn implied_h(mol: &MolGraph, a: usize) -> Option<u8> {
    let atom = &mol.atoms()[a];
    let valences = atom.element.default_valences();
    if valences.is_empty() {
        return None;
    }
    let mut aromatic_bonds = 0u32;
    let mut other = 0u32;
    for &(_, b) in mol.neighbors(a) {
        match mol.bonds()[b].order {
            BondOrder::Aromatic => aromatic_bonds += 1,
            o => other += o.code() as u32,
        }
    }
    if atom.is_aromatic {
        let s1 = aromatic_bonds + other;
        let v = valences.iter().map(|&v| v as u32).find(|&v| v >= s1)?;
        let free = v - s1;
        let needs_double = u32::from(free >= 1);
        Some((free - needs_double) as u8)
    } else {
        let v = valences.iter().map(|&v| v as u32).find(|&v| v >= other)?;
        Some((v - other) as u8)
    }
}

fn atom_token(mol: &MolGraph, a: usize) -> String {
    let atom = &mol.atoms()[a];
    let symbol = if atom.is_aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    if atom.element.is_organic_subset()
        && atom.formal_charge == 0
        && atom.isotope.is_none()
        && implied_h(mol, a) == Some(atom.implicit_h_count)
    {
        return symbol;
    }
    let mut out = String::from("[");
    if let Some(iso) = atom.isotope {
        out.push_str(&iso.to_string());
    }
    out.push_str(&symbol);
    match atom.implicit_h_count {
        0 => {}
        1 => out.push('H'),
        h => {
            out.push('H');
            out.push_str(&h.to_string());
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    out.push(']');
    out
}

/// Kekulé-form token for atoms of an edit graph. Bracket only when needed.
pub(crate) fn plain_token(element: Element, charge: i8, isotope: Option<u16>, explicit_h: Option<u8>) -> String {
    if explicit_h.is_none() && charge == 0 && isotope.is_none() && element.is_organic_subset() {
        return element.symbol().to_string();
    }
    let mut out = String::from("[");
    if let Some(iso) = isotope {
        out.push_str(&iso.to_string());
    }
    out.push_str(element.symbol());
    match explicit_h.unwrap_or(0) {
        0 => {}
        1 => out.push('H'),
        h => out.push_str(&format!("H{h}")),
    }
    match charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    out.push(']');
    out
}

fn ring_label(d: u32) -> String {
    if d < 10 {
        d.to_string()
    } else {
        format!("%{d:02}")
    }
}

enum Task {
    Atom(usize, &'static str),
    Text(&'static str),
}

/// Depth-first SMILES writer over a generic labelled graph. `adjacency[a]`
/// lists `(neighbour, bond symbol)`. Each component starts from its
/// lowest-ranked atom of minimal degree; components are joined by '.'.
pub(crate) fn write_graph(tokens: &[String], adjacency: &[Vec<(usize, &'static str)>], ranks: &[u32]) -> String {
    let n = tokens.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&a| (adjacency[a].len(), ranks[a]));
    let sorted_nbrs: Vec<Vec<(usize, &'static str)>> = adjacency
        .iter()
        .map(|list| {
            let mut l = list.clone();
            l.sort_by_key(|&(v, _)| ranks[v]);
            l
        })
        .collect();

    let mut visited = vec![false; n];
    let mut parent = vec![usize::MAX; n];
    let mut on_stack = vec![false; n];
    let mut children: Vec<Vec<(usize, &'static str)>> = vec![Vec::new(); n];
    // ring closures: (opening atom, closing atom, bond symbol)
    let mut opens: Vec<Vec<(usize, &'static str)>> = vec![Vec::new(); n];
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut fragments = Vec::new();

    for &start in &order {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        on_stack[start] = true;
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some(top) = stack.last_mut() {
            let u = top.0;
            if top.1 < sorted_nbrs[u].len() {
                let (v, sym) = sorted_nbrs[u][top.1];
                top.1 += 1;
                if v == parent[u] {
                    continue;
                }
                if !visited[v] {
                    visited[v] = true;
                    on_stack[v] = true;
                    parent[v] = u;
                    children[u].push((v, sym));
                    stack.push((v, 0));
                } else if on_stack[v] {
                    opens[v].push((u, sym));
                    closes[u].push(v);
                }
            } else {
                on_stack[u] = false;
                stack.pop();
            }
        }
        fragments.push(start);
    }

    let mut out = String::new();
    let mut in_use: Vec<bool> = vec![false; 100];
    let mut digit_of: std::collections::HashMap<(usize, usize), u32> = std::collections::HashMap::new();
    for (fi, &start) in fragments.iter().enumerate() {
        if fi > 0 {
            out.push('.');
        }
        let mut tasks = vec![Task::Atom(start, "")];
        while let Some(task) = tasks.pop() {
            match task {
                Task::Text(t) => out.push_str(t),
                Task::Atom(u, sym) => {
                    out.push_str(sym);
                    out.push_str(&tokens[u]);
                    let mut freed = Vec::new();
                    let mut cl = closes[u].clone();
                    cl.sort_by_key(|&v| ranks[v]);
                    for v in cl {
                        let d = digit_of.remove(&(v, u)).expect("ring opened before it closes");
                        out.push_str(&ring_label(d));
                        freed.push(d);
                    }
                    let mut op = opens[u].clone();
                    op.sort_by_key(|&(v, _)| ranks[v]);
                    for (v, s) in op {
                        let d = (1..100).find(|&d| !in_use[d as usize]).expect("more than 99 open rings");
                        in_use[d as usize] = true;
                        digit_of.insert((u, v), d);
                        out.push_str(s);
                        out.push_str(&ring_label(d));
                    }
                    for d in freed {
                        in_use[d as usize] = false;
                    }
                    let kids = &children[u];
                    if let Some((&(last, last_sym), rest)) = kids.split_last() {
                        tasks.push(Task::Atom(last, last_sym));
                        for &(c, s) in rest.iter().rev() {
                            tasks.push(Task::Text(")"));
                            tasks.push(Task::Atom(c, s));
                            tasks.push(Task::Text("("));
                        }
                    }
                }
            }
        }
    }
    out
}
