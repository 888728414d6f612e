use std::collections::{HashSet, VecDeque};

use super::Ring;

/// Smallest set of smallest rings via Horton candidates and GF(2)
/// independence. Returns exactly `E - V + C` rings.
pub(crate) fn find_sssr(n_atoms: usize, bonds: &[(usize, usize)]) -> Vec<Ring> {
    let n_bonds = bonds.len();
    if n_bonds == 0 {
        return Vec::new();
    }
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_atoms];
    for (i, &(a, b)) in bonds.iter().enumerate() {
        adjacency[a].push((b, i));
        adjacency[b].push((a, i));
    }
    let components = count_components(n_atoms, &adjacency);
    let target = n_bonds + components - n_atoms;
    if target == 0 {
        return Vec::new();
    }

    // bridges cannot be on any ring
    let in_cycle = cyclic_bonds(n_atoms, &adjacency, bonds);

    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut candidates: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut dist = vec![usize::MAX; n_atoms];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n_atoms];
    for root in 0..n_atoms {
        if !adjacency[root].iter().any(|&(_, b)| in_cycle[b]) {
            continue;
        }
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        parent.iter_mut().for_each(|p| *p = None);
        dist[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, b) in &adjacency[u] {
                if in_cycle[b] && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    parent[v] = Some((u, b));
                    queue.push_back(v);
                }
            }
        }
        for (bi, &(x, y)) in bonds.iter().enumerate() {
            if !in_cycle[bi] || dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            if parent[x].map(|p| p.1) == Some(bi) || parent[y].map(|p| p.1) == Some(bi) {
                continue;
            }
            let px = path_to_root(x, &parent);
            let py = path_to_root(y, &parent);
            let on_x: HashSet<usize> = px.iter().map(|&(a, _)| a).collect();
            if py.iter().any(|&(a, _)| a != root && on_x.contains(&a)) {
                continue;
            }
            let mut edge_set: Vec<usize> = px
                .iter()
                .chain(py.iter())
                .filter_map(|&(_, b)| b)
                .chain(std::iter::once(bi))
                .collect();
            edge_set.sort_unstable();
            if !seen.insert(edge_set.clone()) {
                continue;
            }
            // root .. x then y .. (back to root)
            let mut cycle: Vec<usize> = px.iter().rev().map(|&(a, _)| a).collect();
            cycle.extend(py.iter().map(|&(a, _)| a).filter(|&a| a != root));
            candidates.push((cycle, edge_set));
        }
    }
    candidates.sort_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| a.1.cmp(&b.1)));

    let words = n_bonds.div_ceil(64);
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut rings = Vec::with_capacity(target);
    for (cycle, edges) in candidates {
        let mut v = vec![0u64; words];
        for &e in &edges {
            v[e / 64] |= 1 << (e % 64);
        }
        for (pivot, row) in &basis {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (w, r) in v.iter_mut().zip(row) {
                    *w ^= r;
                }
            }
        }
        if let Some(pivot) = lowest_bit(&v) {
            basis.push((pivot, v));
            rings.push(Ring { atoms: cycle, bonds: edges });
            if rings.len() == target {
                break;
            }
        }
    }
    rings
}

fn lowest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

/// Atoms from `start` up to the BFS root, each with the bond to its parent.
fn path_to_root(start: usize, parent: &[Option<(usize, usize)>]) -> Vec<(usize, Option<usize>)> {
    let mut out = Vec::new();
    let mut cur = start;
    loop {
        match parent[cur] {
            Some((p, b)) => {
                out.push((cur, Some(b)));
                cur = p;
            }
            None => {
                out.push((cur, None));
                return out;
            }
        }
    }
}

fn count_components(n: usize, adjacency: &[Vec<(usize, usize)>]) -> usize {
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &(v, _) in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    count
}

/// Marks bonds that lie on at least one cycle, i.e. non-bridges (iterative Tarjan).
fn cyclic_bonds(n: usize, adjacency: &[Vec<(usize, usize)>], bonds: &[(usize, usize)]) -> Vec<bool> {
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0;
    for s in 0..n {
        if disc[s] != usize::MAX {
            continue;
        }
        // (vertex, parent bond, next neighbour index)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(s, None, 0)];
        disc[s] = timer;
        low[s] = timer;
        timer += 1;
        while let Some(&mut (u, pb, ref mut idx)) = stack.last_mut() {
            if *idx < adjacency[u].len() {
                let (v, b) = adjacency[u][*idx];
                *idx += 1;
                if Some(b) == pb {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, Some(b), 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let (Some(b), Some(&(p, _, _))) = (pb, stack.last()) {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[b] = true;
                    }
                }
            }
        }
    }
    is_bridge.into_iter().map(|b| !b).collect()
}
