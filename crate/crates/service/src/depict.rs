//! Planar coordinates for drawing a molecule. Small rings are laid out as
//! regular polygons, chains grow outward in a zigzag, and a short
//! force-directed pass moves chain atoms apart. Best effort only.

use std::collections::VecDeque;
use std::f64::consts::PI;

use leadopt::molgraph::{BondOrder, MolGraph};
use serde::{Deserialize, Serialize};

pub const BOND_LENGTH: f64 = 1.5;
const TEMPLATE_MAX_RING: usize = 8;
const RELAX_STEPS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepictAtom {
    pub index: usize,
    pub symbol: String,
    pub charge: i8,
    pub aromatic: bool,
    pub hydrogens: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepictBond {
    pub begin: usize,
    pub end: usize,
    /// 1, 2, 3, or 4 for aromatic.
    pub order: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Depiction {
    pub smiles: String,
    pub atoms: Vec<DepictAtom>,
    pub bonds: Vec<DepictBond>,
}

pub fn depict(mol: &MolGraph, smiles: &str) -> Depiction {
    let xy = layout(mol);
    let atoms = mol
        .atoms()
        .iter()
        .zip(&xy)
        .map(|(a, &(x, y))| DepictAtom {
            index: a.index,
            symbol: a.element.symbol().to_string(),
            charge: a.formal_charge,
            aromatic: a.is_aromatic,
            hydrogens: mol.total_h_count(a.index),
            x,
            y,
        })
        .collect();
    let bonds = mol
        .bonds()
        .iter()
        .map(|b| DepictBond {
            begin: b.begin,
            end: b.end,
            order: match b.order {
                BondOrder::Aromatic => 4,
                o => o.code(),
            },
        })
        .collect();
    Depiction { smiles: smiles.to_string(), atoms, bonds }
}

type Point = (f64, f64);

fn dist(a: Point, b: Point) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn polar(c: Point, r: f64, angle: f64) -> Point {
    (c.0 + r * angle.cos(), c.1 + r * angle.sin())
}

struct Layout<'a> {
    mol: &'a MolGraph,
    pos: Vec<Option<Point>>,
    fixed: Vec<bool>,
}

impl Layout<'_> {
    fn placed(&self) -> impl Iterator<Item = Point> + '_ {
        self.pos.iter().flatten().copied()
    }

    fn clearance(&self, p: Point) -> f64 {
        self.placed().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)
    }

    /// Regular polygon through the ring, anchored on whatever is already placed.
    fn place_ring(&mut self, ring: &[usize]) {
        let k = ring.len();
        let radius = BOND_LENGTH / (2.0 * (PI / k as f64).sin());
        let step = 2.0 * PI / k as f64;
        let placed: Vec<usize> = (0..k).filter(|&i| self.pos[ring[i]].is_some()).collect();
        if placed.len() > 2 {
            // bridged: the rest grows as a chain and the relaxation closes it
            return;
        }
        // an already placed ring edge: build the polygon on its far side
        let edge = placed.iter().copied().find(|&i| self.pos[ring[(i + 1) % k]].is_some());
        let (center, start_angle, start) = if let Some(i) = edge {
            let (a, b) = (self.pos[ring[i]].unwrap(), self.pos[ring[(i + 1) % k]].unwrap());
            let mid = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
            let apothem = BOND_LENGTH / (2.0 * (PI / k as f64).tan());
            let len = dist(a, b).max(1e-9);
            let normal = (-(b.1 - a.1) / len, (b.0 - a.0) / len);
            let c1 = (mid.0 + apothem * normal.0, mid.1 + apothem * normal.1);
            let c2 = (mid.0 - apothem * normal.0, mid.1 - apothem * normal.1);
            let crowd = |c: Point| {
                self.placed().filter(|&q| q != a && q != b).map(|q| 1.0 / dist(q, c).max(1e-6).powi(2)).sum::<f64>()
            };
            let center = if crowd(c1) <= crowd(c2) { c1 } else { c2 };
            let ang_a = (a.1 - center.1).atan2(a.0 - center.0);
            let ang_b = (b.1 - center.1).atan2(b.0 - center.0);
            let mut diff = ang_b - ang_a;
            while diff > PI {
                diff -= 2.0 * PI;
            }
            while diff < -PI {
                diff += 2.0 * PI;
            }
            (center, ang_a, (i, diff.signum()))
        } else if let Some(&i) = placed.first() {
            // swing the polygon around its anchor to the least crowded spot
            let a = self.pos[ring[i]].unwrap();
            let out = self.outward(ring[i]);
            let crowd = |angle: f64| {
                let center = polar(a, radius, angle);
                (1..k)
                    .map(|j| polar(center, radius, angle + PI + step * j as f64))
                    .map(|v| self.placed().filter(|&q| q != a).map(|q| 1.0 / dist(q, v).max(1e-6).powi(2)).sum::<f64>())
                    .sum::<f64>()
            };
            let best = (0..7)
                .map(|t| out + (t as f64 - 3.0) * PI / 12.0)
                .min_by(|&x, &y| crowd(x).total_cmp(&crowd(y)).then_with(|| (x - out).abs().total_cmp(&(y - out).abs())))
                .unwrap();
            (polar(a, radius, best), best + PI, (i, 1.0))
        } else {
            let origin = self.free_origin();
            (origin, PI / 2.0, (0, 1.0))
        };
        let (i0, dir) = start;
        for j in 0..k {
            let atom = ring[(i0 + j) % k];
            if self.pos[atom].is_none() {
                self.pos[atom] = Some(polar(center, radius, start_angle + dir * step * j as f64));
            }
            self.fixed[atom] = true;
        }
    }

    /// Direction pointing away from an atom's placed neighbours.
    fn outward(&self, atom: usize) -> f64 {
        let p = self.pos[atom].unwrap();
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0);
        for &(nb, _) in self.mol.neighbors(atom) {
            if let Some(q) = self.pos[nb] {
                sx += q.0 - p.0;
                sy += q.1 - p.1;
                n += 1;
            }
        }
        if n == 0 || (sx.abs() < 1e-9 && sy.abs() < 1e-9) {
            0.0
        } else {
            (-sy).atan2(-sx)
        }
    }

    fn free_origin(&self) -> Point {
        let max_x = self.placed().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        if max_x.is_finite() {
            (max_x + 3.0 * BOND_LENGTH, 0.0)
        } else {
            (0.0, 0.0)
        }
    }

    fn place_neighbors(&mut self, atom: usize) {
        let p = self.pos[atom].unwrap();
        let nbs = self.mol.neighbors(atom);
        let open: Vec<usize> = nbs.iter().map(|&(n, _)| n).filter(|&n| self.pos[n].is_none()).collect();
        if open.is_empty() {
            return;
        }
        let mut taken: Vec<f64> = nbs
            .iter()
            .filter_map(|&(n, _)| self.pos[n].map(|q| (q.1 - p.1).atan2(q.0 - p.0)))
            .collect();
        let angles: Vec<f64> = if taken.len() == 1 && open.len() == 1 {
            let back = taken[0];
            let a = back + 2.0 * PI / 3.0;
            let b = back - 2.0 * PI / 3.0;
            let (ca, cb) = (self.clearance(polar(p, BOND_LENGTH, a)), self.clearance(polar(p, BOND_LENGTH, b)));
            vec![if ca + 1e-9 >= cb { a } else { b }]
        } else if taken.is_empty() {
            let n = open.len();
            let spread = if n == 1 { 0.0 } else { 2.0 * PI / n as f64 };
            (0..n).map(|i| -PI / 6.0 + spread * i as f64).collect()
        } else {
            // spread evenly through the widest free arc
            taken.sort_by(f64::total_cmp);
            let mut best = (0.0, 0.0);
            for i in 0..taken.len() {
                let from = taken[i];
                let to = if i + 1 < taken.len() { taken[i + 1] } else { taken[0] + 2.0 * PI };
                if to - from > best.1 {
                    best = (from, to - from);
                }
            }
            let n = open.len();
            (0..n).map(|i| best.0 + best.1 * (i + 1) as f64 / (n + 1) as f64).collect()
        };
        for (&n, a) in open.iter().zip(angles) {
            self.pos[n] = Some(polar(p, BOND_LENGTH, a));
        }
    }

    fn run(&mut self) {
        let n = self.mol.atom_count();
        let rings: Vec<&[usize]> = self
            .mol
            .rings()
            .iter()
            .filter(|r| r.len() <= TEMPLATE_MAX_RING)
            .map(|r| r.atoms.as_slice())
            .collect();
        let mut ring_done = vec![false; rings.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for start in 0..n {
            if self.pos[start].is_some() {
                continue;
            }
            match rings.iter().position(|r| r.contains(&start)) {
                Some(r) => {
                    self.place_ring(rings[r]);
                    ring_done[r] = true;
                    queue.extend(rings[r].iter().copied());
                }
                None => {
                    self.pos[start] = Some(self.free_origin());
                    queue.push_back(start);
                }
            }
            while let Some(atom) = queue.pop_front() {
                // rings through this atom first, so shared edges anchor each polygon
                for r in 0..rings.len() {
                    if !ring_done[r] && rings[r].contains(&atom) {
                        self.place_ring(rings[r]);
                        ring_done[r] = true;
                        queue.extend(rings[r].iter().copied());
                    }
                }
                let before: Vec<bool> = self.pos.iter().map(Option::is_some).collect();
                self.place_neighbors(atom);
                for (i, was) in before.into_iter().enumerate() {
                    if !was && self.pos[i].is_some() {
                        queue.push_back(i);
                    }
                }
            }
        }
    }

    fn relax(&self, pos: &mut [Point]) {
        let n = pos.len();
        if self.fixed.iter().all(|&f| f) {
            return;
        }
        for step in 0..RELAX_STEPS {
            let cap = BOND_LENGTH * 0.2 * (1.0 - step as f64 / RELAX_STEPS as f64) + 0.01;
            let mut force = vec![(0.0, 0.0); n];
            for b in self.mol.bonds() {
                let (i, j) = (b.begin, b.end);
                let d = dist(pos[i], pos[j]).max(1e-6);
                let f = 0.5 * (d - BOND_LENGTH) / d;
                let (dx, dy) = (pos[j].0 - pos[i].0, pos[j].1 - pos[i].1);
                force[i].0 += f * dx;
                force[i].1 += f * dy;
                force[j].0 -= f * dx;
                force[j].1 -= f * dy;
            }
            for i in 0..n {
                for j in i + 1..n {
                    if self.mol.bond_between(i, j).is_some() {
                        continue;
                    }
                    let d = dist(pos[i], pos[j]);
                    if d >= 2.0 * BOND_LENGTH {
                        continue;
                    }
                    let d = d.max(1e-3);
                    let f = 0.3 * (2.0 * BOND_LENGTH - d) / d;
                    let (dx, dy) = (pos[j].0 - pos[i].0, pos[j].1 - pos[i].1);
                    force[i].0 -= f * dx;
                    force[i].1 -= f * dy;
                    force[j].0 += f * dx;
                    force[j].1 += f * dy;
                }
            }
            for i in 0..n {
                if self.fixed[i] {
                    continue;
                }
                let (fx, fy) = force[i];
                let len = (fx * fx + fy * fy).sqrt();
                let scale = if len > cap { cap / len } else { 1.0 };
                pos[i].0 += fx * scale;
                pos[i].1 += fy * scale;
            }
        }
    }
}

/// One (x, y) per atom, in atom order. Deterministic for a given graph.
pub fn layout(mol: &MolGraph) -> Vec<Point> {
    let n = mol.atom_count();
    let mut l = Layout { mol, pos: vec![None; n], fixed: vec![false; n] };
    l.run();
    let mut pos: Vec<Point> = l.pos.iter().map(|p| p.unwrap_or((0.0, 0.0))).collect();
    l.relax(&mut pos);
    // centre on the origin
    if n > 0 {
        let cx = pos.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let cy = pos.iter().map(|p| p.1).sum::<f64>() / n as f64;
        for p in &mut pos {
            p.0 -= cx;
            p.1 -= cy;
        }
    }
    pos
}
