use std::collections::HashSet;

use super::element::Element;
use super::{Atom, Ring};

const KEKULE_STEP_BUDGET: usize = 200_000;

/// Chooses which aromatic bonds become double so that every atom flagged in
/// `needs_double` gets exactly one. `edges` holds `(bond index, a, b)`.
/// Returns the doubled bond indices, or an atom that could not be satisfied.
pub(crate) fn kekulize(n: usize, needs_double: &[bool], edges: &[(usize, usize, usize)]) -> Result<Vec<usize>, usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &(b, x, y) in edges {
        if needs_double[x] && needs_double[y] {
            adj[x].push((y, b));
            adj[y].push((x, b));
        }
    }
    let mut matched: Vec<Option<usize>> = vec![None; n];
    let mut steps = 0usize;
    let mut seen = vec![false; n];
    let mut doubled = Vec::new();
    for start in 0..n {
        if !needs_double[start] || seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut i = 0;
        while i < comp.len() {
            for &(v, _) in &adj[comp[i]] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                }
            }
            i += 1;
        }
        if comp.len() % 2 == 1 {
            return Err(*comp.iter().min().unwrap());
        }
        if !solve(&comp, &adj, &mut matched, &mut steps) {
            return Err(*comp.iter().min().unwrap());
        }
    }
    for (a, m) in matched.iter().enumerate() {
        if let Some(b) = m {
            let partner = adj[a].iter().find(|(_, bb)| bb == b).map(|(v, _)| *v).unwrap();
            if a < partner {
                doubled.push(*b);
            }
        }
    }
    doubled.sort_unstable();
    Ok(doubled)
}

/// Backtracking perfect matching, always branching on the unmatched atom
/// with the fewest free partners.
fn solve(comp: &[usize], adj: &[Vec<(usize, usize)>], matched: &mut [Option<usize>], steps: &mut usize) -> bool {
    // explicit stack of (atom, options, next option index)
    let mut stack: Vec<(usize, Vec<(usize, usize)>, usize)> = Vec::new();
    loop {
        *steps += 1;
        if *steps > KEKULE_STEP_BUDGET {
            for &a in comp {
                matched[a] = None;
            }
            return false;
        }
        let mut best: Option<(usize, Vec<(usize, usize)>)> = None;
        for &a in comp {
            if matched[a].is_some() {
                continue;
            }
            let opts: Vec<(usize, usize)> = adj[a].iter().copied().filter(|&(v, _)| matched[v].is_none()).collect();
            if best.as_ref().is_none_or(|(_, o)| opts.len() < o.len()) {
                let empty = opts.is_empty();
                best = Some((a, opts));
                if empty {
                    break;
                }
            }
        }
        let Some((atom, opts)) = best else {
            return true;
        };
        stack.push((atom, opts, 0));
        // advance: try next option of the top frame, unwinding exhausted frames
        loop {
            let Some((a, opts, idx)) = stack.last_mut() else {
                return false;
            };
            if let Some(prev) = matched[*a] {
                let partner = adj[*a].iter().find(|(_, b)| *b == prev).map(|(v, _)| *v).unwrap();
                matched[*a] = None;
                matched[partner] = None;
            }
            if *idx < opts.len() {
                let (v, b) = opts[*idx];
                *idx += 1;
                matched[*a] = Some(b);
                matched[v] = Some(b);
                break;
            }
            stack.pop();
        }
    }
}

/// Hückel perception on a Kekulé structure. Candidate cycles are the SSSR
/// rings plus pairs of rings fused through exactly one bond; accepted cycles
/// feed back into later candidates until nothing changes.
pub(crate) fn perceive_aromaticity(
    atoms: &[Atom],
    bonds: &[(usize, usize)],
    kekule: &[u8],
    rings: &[Ring],
) -> (Vec<bool>, Vec<bool>) {
    let n = atoms.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, &(a, b)) in bonds.iter().enumerate() {
        adj[a].push((b, i));
        adj[b].push((a, i));
    }
    let mut in_ring = vec![false; bonds.len()];
    for r in rings {
        for &b in &r.bonds {
            in_ring[b] = true;
        }
    }

    let mut candidates: Vec<(Vec<usize>, HashSet<usize>)> = rings
        .iter()
        .map(|r| (r.atoms.clone(), r.bonds.iter().copied().collect()))
        .collect();
    for i in 0..rings.len() {
        for j in i + 1..rings.len() {
            let a: HashSet<usize> = rings[i].bonds.iter().copied().collect();
            let shared = rings[j].bonds.iter().filter(|b| a.contains(b)).count();
            let shared_atoms = rings[j].atoms.iter().filter(|x| rings[i].atoms.contains(x)).count();
            if shared == 1 && shared_atoms == 2 {
                let edges: HashSet<usize> = a.symmetric_difference(&rings[j].bonds.iter().copied().collect()).copied().collect();
                let mut cand_atoms: Vec<usize> = rings[i].atoms.clone();
                cand_atoms.extend(rings[j].atoms.iter().filter(|x| !rings[i].atoms.contains(x)));
                candidates.push((cand_atoms, edges));
            }
        }
    }

    let mut arom_atom = vec![false; n];
    let mut arom_bond = vec![false; bonds.len()];
    let mut accepted = vec![false; candidates.len()];
    loop {
        let mut changed = false;
        for (ci, (cand_atoms, edges)) in candidates.iter().enumerate() {
            if accepted[ci] {
                continue;
            }
            let mut total = 0u32;
            let mut ok = true;
            for &a in cand_atoms {
                match pi_electrons(a, atoms, &adj, kekule, edges, &arom_bond, &in_ring) {
                    Some(e) => total += e,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && total % 4 == 2 {
                accepted[ci] = true;
                changed = true;
                for &a in cand_atoms {
                    arom_atom[a] = true;
                }
                for &b in edges {
                    arom_bond[b] = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (arom_atom, arom_bond)
}

fn pi_electrons(
    a: usize,
    atoms: &[Atom],
    adj: &[Vec<(usize, usize)>],
    kekule: &[u8],
    cycle_edges: &HashSet<usize>,
    arom_bond: &[bool],
    in_ring: &[bool],
) -> Option<u32> {
    let atom = &atoms[a];
    let mut double: Option<(usize, usize)> = None;
    for &(v, b) in &adj[a] {
        match kekule[b] {
            3 => return None,
            2 => {
                if double.is_some() {
                    return None;
                }
                double = Some((v, b));
            }
            _ => {}
        }
    }
    let connections = adj[a].len() + atom.implicit_h_count as usize;
    if connections > 3 {
        return None;
    }
    if let Some((partner, b)) = double {
        if cycle_edges.contains(&b) || arom_bond[b] {
            return Some(1);
        }
        if !in_ring[b] && atoms[partner].element.is_electronegative() && atom.element == Element::C {
            return Some(0);
        }
        return None;
    }
    let e = atom.element;
    match atom.formal_charge {
        0 if e == Element::N || e == Element::P => (connections == 3).then_some(2),
        0 if e == Element::O || e == Element::S || e == Element::SE || e.atomic_number() == 52 => {
            (connections == 2).then_some(2)
        }
        0 if e == Element::B => (connections == 3).then_some(0),
        -1 if e == Element::C || e == Element::N => Some(2),
        1 if e == Element::C => Some(0),
        _ => None,
    }
}
