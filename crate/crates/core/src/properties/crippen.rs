//! Wildman–Crippen atom typing. Each atom gets the first type (in table
//! order) whose pattern it satisfies; hydrogens are typed by the atom they
//! sit on.

use crate::molgraph::{BondOrder, Element, MolGraph};

struct Ctx<'a> {
    mol: &'a MolGraph,
}

impl<'a> Ctx<'a> {
    fn elem(&self, a: usize) -> Element {
        self.mol.atoms()[a].element
    }
    fn arom(&self, a: usize) -> bool {
        self.mol.atoms()[a].is_aromatic
    }
    fn charge(&self, a: usize) -> i8 {
        self.mol.atoms()[a].formal_charge
    }
    fn h(&self, a: usize) -> u32 {
        self.mol.total_h_count(a)
    }
    /// Total connectivity, implicit hydrogens included.
    fn x(&self, a: usize) -> u32 {
        self.mol.degree(a) as u32 + self.mol.atoms()[a].implicit_h_count as u32
    }
    /// Neighbours with bond orders, hydrogen graph nodes excluded.
    fn nbs(&self, a: usize) -> Vec<(usize, BondOrder)> {
        self.mol
            .neighbors(a)
            .iter()
            .filter(|&&(v, _)| self.elem(v) != Element::H)
            .map(|&(v, b)| (v, self.mol.bonds()[b].order))
            .collect()
    }
    fn is_aliph_c(&self, v: usize) -> bool {
        self.elem(v) == Element::C && !self.arom(v)
    }
}

fn single_like(o: BondOrder) -> bool {
    matches!(o, BondOrder::Single | BondOrder::Aromatic)
}

fn in_set(e: Element, set: &[Element]) -> bool {
    set.contains(&e)
}

const HET: &[Element] = &[
    Element::N,
    Element::O,
    Element::P,
    Element::S,
    Element::F,
    Element::CL,
    Element::BR,
    Element::I,
];

/// Crippen type of a heavy atom, or `None` when no type applies.
pub(crate) fn heavy_atom_type(mol: &MolGraph, a: usize) -> Option<&'static str> {
    let c = Ctx { mol };
    match c.elem(a) {
        Element::C => Some(if c.arom(a) { aromatic_carbon(&c, a) } else { aliphatic_carbon(&c, a) }),
        Element::N => Some(nitrogen(&c, a)),
        Element::O => Some(oxygen(&c, a)),
        Element::F | Element::CL | Element::BR | Element::I => Some(if c.charge(a) != 0 {
            "Hal"
        } else {
            match c.elem(a) {
                Element::F => "F",
                Element::CL => "Cl",
                Element::BR => "Br",
                _ => "I",
            }
        }),
        Element::P => Some("P"),
        Element::S => Some(if c.arom(a) {
            "S3"
        } else if c.charge(a) == 0 {
            "S1"
        } else {
            "S2"
        }),
        _ => None,
    }
}

fn aliphatic_carbon(c: &Ctx, a: usize) -> &'static str {
    let nbs = c.nbs(a);
    let h = c.h(a);
    let x = c.x(a);
    let count = |f: &dyn Fn(usize, BondOrder) -> bool| nbs.iter().filter(|&&(v, o)| f(v, o)).count();
    let any = |f: &dyn Fn(usize, BondOrder) -> bool| nbs.iter().any(|&(v, o)| f(v, o));

    let sl_c = count(&|v, o| single_like(o) && c.is_aliph_c(v));
    if h == 4 || (h == 3 && sl_c >= 1) || (h == 2 && sl_c >= 2) {
        return "C1";
    }
    if (h == 1 && sl_c >= 3) || (h == 0 && sl_c >= 4) {
        return "C2";
    }
    let sl_a = count(&|v, o| single_like(o) && !c.arom(v));
    let sl_het = count(&|v, o| single_like(o) && !c.arom(v) && in_set(c.elem(v), HET));
    if (h == 3 && sl_het >= 1) || (h == 2 && x == 4 && sl_het >= 1 && sl_a >= 2) {
        return "C3";
    }
    if x == 4 && sl_het >= 1 && ((h == 1 && sl_a >= 3) || (h == 0 && sl_a >= 4)) {
        return "C4";
    }
    if any(&|v, o| o == BondOrder::Double && !c.arom(v) && c.elem(v) != Element::C) {
        return "C5";
    }
    let dbl_c = count(&|v, o| o == BondOrder::Double && c.is_aliph_c(v));
    if dbl_c >= 1 && ((h == 2) || (h == 1 && sl_a >= 1) || (h == 0 && sl_a >= 2)) || dbl_c >= 2 {
        return "C6";
    }
    if x == 2 && any(&|v, o| o == BondOrder::Triple && !c.arom(v)) {
        return "C7";
    }
    let sl_arom = count(&|v, o| single_like(o) && c.arom(v));
    if h == 3 && any(&|v, o| single_like(o) && c.arom(v) && c.elem(v) == Element::C) {
        return "C8";
    }
    if h == 3 && sl_arom >= 1 {
        return "C9";
    }
    if x == 4 && sl_arom >= 1 {
        match h {
            2 => return "C10",
            1 => return "C11",
            0 => return "C12",
            _ => {}
        }
    }
    let sl_arom_c = count(&|v, o| single_like(o) && c.arom(v) && c.elem(v) == Element::C);
    if dbl_c >= 1
        && ((sl_arom >= 1 && sl_a >= 1) || (sl_arom >= 2 && sl_arom_c >= 1) || (h == 1 && sl_arom >= 1))
        || any(&|v, o| o == BondOrder::Double && c.arom(v) && c.elem(v) == Element::C)
    {
        return "C26";
    }
    if x == 4
        && any(&|v, o| {
            single_like(o)
                && !c.arom(v)
                && !matches!(c.elem(v), Element::C)
                && !in_set(c.elem(v), HET)
        })
    {
        return "C27";
    }
    "CS"
}

fn aromatic_carbon(c: &Ctx, a: usize) -> &'static str {
    let nbs = c.nbs(a);
    let h = c.h(a);
    let any = |f: &dyn Fn(usize, BondOrder) -> bool| nbs.iter().any(|&(v, o)| f(v, o));
    const C13_EXCLUDED: &[Element] = &[
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::F,
        Element::CL,
        Element::BR,
        Element::I,
    ];
    if h == 0 && any(&|v, o| o == BondOrder::Single && !c.arom(v) && !in_set(c.elem(v), C13_EXCLUDED)) {
        return "C13";
    }
    for (e, t) in [(Element::F, "C14"), (Element::CL, "C15"), (Element::BR, "C16"), (Element::I, "C17")] {
        if any(&|v, _| c.elem(v) == e) {
            return t;
        }
    }
    if h == 1 {
        return "C18";
    }
    let ring = nbs.iter().filter(|&&(v, o)| o == BondOrder::Aromatic && c.arom(v)).count();
    if ring >= 3 {
        return "C19";
    }
    if ring >= 2 {
        let single_to = |f: &dyn Fn(usize) -> bool| any(&|v, o| o == BondOrder::Single && f(v));
        if single_to(&|v| c.arom(v)) {
            return "C20";
        }
        for (e, t) in [(Element::C, "C21"), (Element::N, "C22"), (Element::O, "C23"), (Element::S, "C24")] {
            if single_to(&|v| !c.arom(v) && c.elem(v) == e) {
                return t;
            }
        }
        if any(&|v, o| {
            o == BondOrder::Double && !c.arom(v) && matches!(c.elem(v), Element::C | Element::N | Element::O)
        }) {
            return "C25";
        }
    }
    "CS"
}

fn nitrogen(c: &Ctx, a: usize) -> &'static str {
    let charge = c.charge(a);
    if c.arom(a) {
        return match charge {
            0 => "N11",
            q if q > 0 => "N12",
            _ => "NS",
        };
    }
    let nbs = c.nbs(a);
    let h = c.h(a);
    let count = |f: &dyn Fn(usize, BondOrder) -> bool| nbs.iter().filter(|&&(v, o)| f(v, o)).count();
    let any = |f: &dyn Fn(usize, BondOrder) -> bool| nbs.iter().any(|&(v, o)| f(v, o));
    let sl = count(&|_, o| single_like(o));
    let sl_a = count(&|v, o| single_like(o) && !c.arom(v));
    let sl_arom = count(&|v, o| single_like(o) && c.arom(v));
    let dbl = count(&|_, o| o == BondOrder::Double);
    if charge == 0 {
        if h == 2 && sl_a >= 1 {
            return "N1";
        }
        if h == 1 && sl_a >= 2 {
            return "N2";
        }
        if h == 2 && sl_arom >= 1 {
            return "N3";
        }
        if h == 1 && sl_arom >= 1 && sl >= 2 {
            return "N4";
        }
        if h == 1 && dbl >= 1 {
            return "N5";
        }
        if dbl >= 1 && sl >= 1 {
            return "N6";
        }
        if sl_a >= 3 {
            return "N7";
        }
        if sl >= 3 && sl_arom >= 1 {
            return "N8";
        }
        if any(&|v, o| o == BondOrder::Triple && !c.arom(v)) {
            return "N9";
        }
        return "NS";
    }
    if charge > 0 {
        if (1..=3).contains(&h) {
            return "N10";
        }
        if h == 0 {
            let dbl_a = count(&|v, o| o == BondOrder::Double && !c.arom(v));
            if sl_a >= 4 || (dbl_a >= 1 && sl_a >= 1 && nbs.len() >= 3) {
                return "N13";
            }
            if any(&|v, o| o == BondOrder::Double && c.elem(v) == Element::C)
                && any(&|v, o| o == BondOrder::Double && c.elem(v) == Element::N)
            {
                return "N13";
            }
        }
        if any(&|v, o| o == BondOrder::Triple && !c.arom(v)) {
            return "N14";
        }
        if any(&|v, o| o == BondOrder::Double && c.elem(v) == Element::N && c.charge(v) < 0)
            && any(&|v, o| o == BondOrder::Double && c.elem(v) == Element::N && c.charge(v) >= 0)
        {
            return "N14";
        }
        return "NS";
    }
    "N14"
}

fn oxygen(c: &Ctx, a: usize) -> &'static str {
    if c.arom(a) {
        return "O1";
    }
    let nbs = c.nbs(a);
    let h = c.h(a);
    let x = c.x(a);
    let charge = c.charge(a);
    if h == 1 || h == 2 {
        return "O2";
    }
    let sl_a = nbs.iter().filter(|&&(v, o)| single_like(o) && !c.arom(v)).count();
    let sl = nbs.iter().filter(|&&(_, o)| single_like(o)).count();
    let sl_arom = nbs.iter().filter(|&&(v, o)| single_like(o) && c.arom(v)).count();
    if sl_a >= 2 {
        return "O3";
    }
    if sl >= 2 && sl_arom >= 1 {
        return "O4";
    }
    let double = nbs.iter().find(|&&(_, o)| o == BondOrder::Double).map(|&(v, _)| v);
    if let Some(p) = double {
        if matches!(c.elem(p), Element::N | Element::O) {
            return "O5";
        }
    }
    if x == 1 && charge == -1 {
        if let Some(&(p, _)) = nbs.first() {
            match c.elem(p) {
                Element::N => return "O5",
                Element::S => return "O6",
                Element::C => {}
                _ => return "O7",
            }
        }
    }
    if let Some(p) = double {
        if c.elem(p) == Element::C && c.arom(p) {
            return "O8";
        }
        if c.is_aliph_c(p) {
            let others: Vec<(usize, BondOrder)> = c.nbs(p).into_iter().filter(|&(v, _)| v != a).collect();
            let hp = c.h(p);
            let n_aliph_c = others.iter().filter(|&&(v, o)| single_like(o) && c.is_aliph_c(v)).count();
            let n_a = others.iter().filter(|&&(v, o)| single_like(o) && !c.arom(v)).count();
            let n_arom = others.iter().filter(|&&(v, o)| single_like(o) && c.arom(v)).count();
            let n_arom_c = others
                .iter()
                .filter(|&&(v, o)| single_like(o) && c.arom(v) && c.elem(v) == Element::C)
                .count();
            let has = |e: Element| others.iter().any(|&(v, o)| single_like(o) && !c.arom(v) && c.elem(v) == e);
            let o9 = (hp == 1 && n_aliph_c >= 1)
                || n_aliph_c >= 2
                || (n_aliph_c >= 1 && n_a >= 2)
                || (hp == 1 && has(Element::N))
                || (hp == 1 && has(Element::O))
                || hp == 2
                || (c.x(p) == 2
                    && others
                        .iter()
                        .any(|&(v, o)| o == BondOrder::Double && c.elem(v) == Element::O));
            if o9 {
                return "O9";
            }
            let o10 = (hp == 1 && n_arom_c >= 1)
                || (n_aliph_c >= 1 && n_arom >= 1)
                || (n_arom_c >= 1 && n_arom >= 2)
                || (n_arom_c >= 1 && n_a >= 1);
            if o10 {
                return "O10";
            }
            let hetero = others
                .iter()
                .filter(|&&(v, _)| !matches!(c.elem(v), Element::C | Element::H))
                .count();
            if hetero >= 2 {
                return "O11";
            }
        }
    }
    if charge == -1 {
        for &(p, _) in &nbs {
            if c.elem(p) == Element::C
                && c.nbs(p)
                    .iter()
                    .any(|&(v, o)| v != a && o == BondOrder::Double && c.elem(v) == Element::O)
            {
                return "O12";
            }
        }
    }
    "OS"
}

/// Crippen type of one hydrogen attached to `parent` (`None` for a lone
/// hydrogen). `exclude` is the hydrogen's own graph index when it is a node.
pub(crate) fn hydrogen_type(mol: &MolGraph, parent: Option<usize>, exclude: Option<usize>) -> &'static str {
    let c = Ctx { mol };
    let Some(p) = parent else {
        return "HS";
    };
    match c.elem(p) {
        Element::C | Element::H => "H1",
        Element::O => {
            let others: Vec<usize> = c
                .nbs(p)
                .into_iter()
                .map(|(v, _)| v)
                .filter(|&v| Some(v) != exclude)
                .collect();
            if others
                .iter()
                .any(|&v| (c.is_aliph_c(v) && c.x(v) == 4) || (c.elem(v) == Element::C && c.arom(v)))
                || others.iter().any(|&v| !matches!(c.elem(v), Element::C | Element::N | Element::O))
            {
                return "H2";
            }
            if others.iter().any(|&v| c.elem(v) == Element::N) {
                return "H3";
            }
            let enol_like = others.iter().any(|&v| {
                c.elem(v) == Element::C
                    && c.nbs(v).iter().any(|&(w, o)| {
                        o == BondOrder::Double && matches!(c.elem(w), Element::C | Element::N | Element::O | Element::S)
                    })
            });
            if enol_like || others.iter().any(|&v| c.elem(v) == Element::O) {
                return "H4";
            }
            "HS"
        }
        Element::N => "H3",
        _ => "H2",
    }
}
