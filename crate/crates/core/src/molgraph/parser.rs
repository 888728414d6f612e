use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use super::aromaticity::{kekulize, perceive_aromaticity};
use super::element::Element;
use super::rings::find_sssr;
use super::{Atom, Bond, BondOrder, BondStereo, MolGraph, Ring};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("syntax error at offset {offset}: {reason}")]
    Syntax { offset: usize, reason: SyntaxIssue },
    #[error("valence error at offset {offset}: {reason}")]
    Valence { offset: usize, reason: ValenceIssue },
}

impl SmilesError {
    /// 0-based character offset the error points at.
    pub fn offset(&self) -> usize {
        match self {
            SmilesError::Syntax { offset, .. } | SmilesError::Valence { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxIssue {
    #[error("empty input")]
    Empty,
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unknown element symbol {0:?}")]
    UnknownElement(String),
    #[error("unclosed branch")]
    UnclosedBranch,
    #[error("unmatched closing parenthesis")]
    UnmatchedParen,
    #[error("empty branch")]
    EmptyBranch,
    #[error("no atom before this symbol")]
    MissingAtom,
    #[error("bond symbol not followed by an atom")]
    DanglingBond,
    #[error("unclosed ring bond {0}")]
    UnclosedRing(u32),
    #[error("ring closure bond symbols disagree")]
    RingBondMismatch,
    #[error("ring closure joins an atom to itself")]
    SelfBond,
    #[error("duplicate bond between the same atoms")]
    DuplicateBond,
    #[error("unterminated bracket atom")]
    UnclosedBracket,
    #[error("malformed bracket atom")]
    BadBracket,
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValenceIssue {
    #[error("{element} with charge {charge} cannot have valence {valence}")]
    Exceeded { element: Element, charge: i8, valence: u32 },
    #[error("aromatic atom is not in a ring")]
    AromaticOutsideRing,
    #[error("aromatic system cannot be kekulized")]
    Kekulization,
}

fn syntax(offset: usize, reason: SyntaxIssue) -> SmilesError {
    SmilesError::Syntax { offset, reason }
}

fn valence(offset: usize, reason: ValenceIssue) -> SmilesError {
    SmilesError::Valence { offset, reason }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSpec {
    Implicit,
    Single,
    Double,
    Triple,
    Aromatic,
}

#[derive(Debug, Clone)]
struct RawAtom {
    element: Element,
    aromatic: bool,
    charge: i8,
    bracket_h: Option<u8>,
    isotope: Option<u16>,
    chirality: Option<String>,
    offset: usize,
}

#[derive(Debug, Clone)]
struct RawBond {
    a: usize,
    b: usize,
    spec: BondSpec,
    stereo: Option<BondStereo>,
}

struct PendingBond {
    spec: BondSpec,
    stereo: Option<BondStereo>,
    offset: usize,
}

struct OpenRing {
    atom: usize,
    spec: BondSpec,
    stereo: Option<BondStereo>,
    offset: usize,
}

struct Branch {
    atom: usize,
    offset: usize,
    has_content: bool,
}

/// Parses SMILES text into a validated molecular graph.
///
/// ```
/// use leadopt::molgraph::parse_smiles;
/// let benzene = parse_smiles("c1ccccc1").unwrap();
/// assert_eq!(benzene.rings().len(), 1);
/// assert!(parse_smiles("C(").is_err());
/// ```
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    parse_smiles_bytes(text.as_bytes()).map_err(|e| match e {
        // offsets are byte positions; only non-ASCII input makes them differ
        SmilesError::Syntax { offset, reason } => SmilesError::Syntax {
            offset: char_offset(text, offset),
            reason,
        },
        other => other,
    })
}

fn char_offset(text: &str, byte: usize) -> usize {
    let mut b = byte.min(text.len());
    while !text.is_char_boundary(b) {
        b -= 1;
    }
    text[..b].chars().count()
}

/// Parses raw bytes. Anything outside printable ASCII is a syntax error.
pub fn parse_smiles_bytes(bytes: &[u8]) -> Result<MolGraph, SmilesError> {
    let (atoms, bonds) = Scanner::new(bytes).run()?;
    build(atoms, bonds)
}

struct Scanner<'a> {
    s: &'a [u8],
    i: usize,
    atoms: Vec<RawAtom>,
    bonds: Vec<RawBond>,
    bond_keys: HashSet<(usize, usize)>,
    prev: Option<usize>,
    pending: Option<PendingBond>,
    branches: Vec<Branch>,
    rings: BTreeMap<u32, OpenRing>,
}

impl<'a> Scanner<'a> {
    fn new(s: &'a [u8]) -> Self {
        Scanner {
            s,
            i: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            bond_keys: HashSet::new(),
            prev: None,
            pending: None,
            branches: Vec::new(),
            rings: BTreeMap::new(),
        }
    }

    fn peek(&self, k: usize) -> Option<u8> {
        self.s.get(self.i + k).copied()
    }

    fn run(mut self) -> Result<(Vec<RawAtom>, Vec<RawBond>), SmilesError> {
        if self.s.is_empty() {
            return Err(syntax(0, SyntaxIssue::Empty));
        }
        while self.i < self.s.len() {
            let c = self.s[self.i];
            let at = self.i;
            match c {
                b'(' => {
                    if self.prev.is_none() {
                        return Err(syntax(at, SyntaxIssue::MissingAtom));
                    }
                    if self.pending.is_some() {
                        return Err(syntax(at, SyntaxIssue::UnexpectedChar('(')));
                    }
                    if let Some(top) = self.branches.last() {
                        if !top.has_content && top.atom == self.prev.unwrap() {
                            return Err(syntax(at, SyntaxIssue::EmptyBranch));
                        }
                    }
                    self.branches.push(Branch {
                        atom: self.prev.unwrap(),
                        offset: at,
                        has_content: false,
                    });
                    self.i += 1;
                }
                b')' => {
                    if let Some(p) = &self.pending {
                        return Err(syntax(p.offset, SyntaxIssue::DanglingBond));
                    }
                    let top = self
                        .branches
                        .pop()
                        .ok_or_else(|| syntax(at, SyntaxIssue::UnmatchedParen))?;
                    if !top.has_content {
                        return Err(syntax(top.offset, SyntaxIssue::EmptyBranch));
                    }
                    self.prev = Some(top.atom);
                    self.i += 1;
                }
                b'.' => {
                    if let Some(p) = &self.pending {
                        return Err(syntax(p.offset, SyntaxIssue::DanglingBond));
                    }
                    if self.prev.is_none() {
                        return Err(syntax(at, SyntaxIssue::MissingAtom));
                    }
                    if !self.branches.is_empty() {
                        return Err(syntax(at, SyntaxIssue::Unsupported("'.' inside a branch")));
                    }
                    self.prev = None;
                    self.i += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.prev.is_none() {
                        return Err(syntax(at, SyntaxIssue::MissingAtom));
                    }
                    if self.pending.is_some() {
                        return Err(syntax(at, SyntaxIssue::UnexpectedChar(c as char)));
                    }
                    let (spec, stereo) = match c {
                        b'-' => (BondSpec::Single, None),
                        b'=' => (BondSpec::Double, None),
                        b'#' => (BondSpec::Triple, None),
                        b':' => (BondSpec::Aromatic, None),
                        b'/' => (BondSpec::Single, Some(BondStereo::Up)),
                        _ => (BondSpec::Single, Some(BondStereo::Down)),
                    };
                    self.pending = Some(PendingBond { spec, stereo, offset: at });
                    self.i += 1;
                }
                b'$' => return Err(syntax(at, SyntaxIssue::Unsupported("quadruple bond"))),
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom)?;
                }
                b'*' => return Err(syntax(at, SyntaxIssue::Unsupported("wildcard atom"))),
                _ if c.is_ascii_alphabetic() => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom)?;
                }
                _ => {
                    let ch = if c.is_ascii() {
                        c as char
                    } else {
                        std::str::from_utf8(&self.s[at..])
                            .ok()
                            .and_then(|t| t.chars().next())
                            .unwrap_or(char::REPLACEMENT_CHARACTER)
                    };
                    return Err(syntax(at, SyntaxIssue::UnexpectedChar(ch)));
                }
            }
        }
        if let Some(p) = &self.pending {
            return Err(syntax(p.offset, SyntaxIssue::DanglingBond));
        }
        if let Some(b) = self.branches.last() {
            return Err(syntax(b.offset, SyntaxIssue::UnclosedBranch));
        }
        if let Some((num, ring)) = self.rings.iter().min_by_key(|(_, r)| r.offset) {
            return Err(syntax(ring.offset, SyntaxIssue::UnclosedRing(*num)));
        }
        if self.atoms.is_empty() {
            return Err(syntax(0, SyntaxIssue::Empty));
        }
        Ok((self.atoms, self.bonds))
    }

    fn add_bond(&mut self, a: usize, b: usize, spec: BondSpec, stereo: Option<BondStereo>, at: usize) -> Result<(), SmilesError> {
        if a == b {
            return Err(syntax(at, SyntaxIssue::SelfBond));
        }
        let key = (a.min(b), a.max(b));
        if !self.bond_keys.insert(key) {
            return Err(syntax(at, SyntaxIssue::DuplicateBond));
        }
        self.bonds.push(RawBond { a, b, spec, stereo });
        Ok(())
    }

    fn add_atom(&mut self, atom: RawAtom) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        let at = atom.offset;
        self.atoms.push(atom);
        if let Some(p) = self.prev {
            let pending = self.pending.take();
            let (spec, stereo) = pending.map(|b| (b.spec, b.stereo)).unwrap_or((BondSpec::Implicit, None));
            self.add_bond(p, idx, spec, stereo, at)?;
        }
        if let Some(top) = self.branches.last_mut() {
            top.has_content = true;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let at = self.i;
        let prev = self.prev.ok_or_else(|| syntax(at, SyntaxIssue::MissingAtom))?;
        let num = if self.s[self.i] == b'%' {
            match (self.peek(1), self.peek(2)) {
                (Some(d1), Some(d2)) if d1.is_ascii_digit() && d2.is_ascii_digit() => {
                    self.i += 3;
                    ((d1 - b'0') as u32) * 10 + (d2 - b'0') as u32
                }
                _ => return Err(syntax(at, SyntaxIssue::UnexpectedChar('%'))),
            }
        } else {
            let d = self.s[self.i] - b'0';
            self.i += 1;
            d as u32
        };
        let pending = self.pending.take();
        match self.rings.remove(&num) {
            Some(open) => {
                let close_spec = pending.as_ref().map(|p| p.spec);
                let spec = match (open.spec, close_spec) {
                    (s, None) | (s, Some(BondSpec::Implicit)) => s,
                    (BondSpec::Implicit, Some(s)) => s,
                    (a, Some(b)) if a == b => a,
                    _ => return Err(syntax(at, SyntaxIssue::RingBondMismatch)),
                };
                let stereo = open.stereo.or(pending.and_then(|p| p.stereo));
                self.add_bond(open.atom, prev, spec, stereo, at)?;
            }
            None => {
                let (spec, stereo) = pending.map(|p| (p.spec, p.stereo)).unwrap_or((BondSpec::Implicit, None));
                self.rings.insert(num, OpenRing { atom: prev, spec, stereo, offset: at });
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<RawAtom, SmilesError> {
        let at = self.i;
        let c = self.s[self.i];
        let (element, aromatic, len) = match c {
            b'B' if self.peek(1) == Some(b'r') => (Element::BR, false, 2),
            b'C' if self.peek(1) == Some(b'l') => (Element::CL, false, 2),
            b'B' => (Element::B, false, 1),
            b'C' => (Element::C, false, 1),
            b'N' => (Element::N, false, 1),
            b'O' => (Element::O, false, 1),
            b'P' => (Element::P, false, 1),
            b'S' => (Element::S, false, 1),
            b'F' => (Element::F, false, 1),
            b'I' => (Element::I, false, 1),
            b'b' => (Element::B, true, 1),
            b'c' => (Element::C, true, 1),
            b'n' => (Element::N, true, 1),
            b'o' => (Element::O, true, 1),
            b'p' => (Element::P, true, 1),
            b's' => (Element::S, true, 1),
            _ => {
                let mut sym = String::new();
                sym.push(c as char);
                if c.is_ascii_uppercase() {
                    if let Some(n) = self.peek(1).filter(|n| n.is_ascii_lowercase()) {
                        sym.push(n as char);
                    }
                }
                return Err(syntax(at, SyntaxIssue::UnknownElement(sym)));
            }
        };
        self.i += len;
        Ok(RawAtom {
            element,
            aromatic,
            charge: 0,
            bracket_h: None,
            isotope: None,
            chirality: None,
            offset: at,
        })
    }

    fn read_number(&mut self, max_digits: usize) -> Option<u32> {
        let start = self.i;
        let mut value: u32 = 0;
        while let Some(d) = self.peek(0).filter(u8::is_ascii_digit) {
            if self.i - start >= max_digits {
                return None;
            }
            value = value * 10 + (d - b'0') as u32;
            self.i += 1;
        }
        if self.i == start {
            None
        } else {
            Some(value)
        }
    }

    fn bracket_atom(&mut self) -> Result<RawAtom, SmilesError> {
        let open = self.i;
        self.i += 1;
        let unterminated = |s: &Self| {
            if s.i >= s.s.len() {
                syntax(open, SyntaxIssue::UnclosedBracket)
            } else {
                syntax(s.i, SyntaxIssue::BadBracket)
            }
        };

        let isotope = if self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
            let v = self.read_number(4).ok_or_else(|| syntax(self.i, SyntaxIssue::BadBracket))?;
            Some(v as u16)
        } else {
            None
        };

        let sym_at = self.i;
        let c = self.peek(0).ok_or_else(|| unterminated(self))?;
        let (element, aromatic) = if c.is_ascii_uppercase() {
            let two = self.peek(1).filter(|n| n.is_ascii_lowercase()).and_then(|n| {
                let s = [c, n];
                Element::from_symbol(std::str::from_utf8(&s).unwrap())
            });
            match two {
                Some(e) => {
                    self.i += 2;
                    (e, false)
                }
                None => {
                    let s = [c];
                    let e = Element::from_symbol(std::str::from_utf8(&s).unwrap())
                        .ok_or_else(|| syntax(sym_at, SyntaxIssue::UnknownElement((c as char).to_string())))?;
                    self.i += 1;
                    (e, false)
                }
            }
        } else if c.is_ascii_lowercase() {
            let two = match (c, self.peek(1)) {
                (b's', Some(b'e')) => Some(Element::SE),
                (b'a', Some(b's')) => Element::from_symbol("As"),
                (b't', Some(b'e')) => Element::from_symbol("Te"),
                _ => None,
            };
            match two {
                Some(e) => {
                    self.i += 2;
                    (e, true)
                }
                None => {
                    let e = match c {
                        b'b' => Element::B,
                        b'c' => Element::C,
                        b'n' => Element::N,
                        b'o' => Element::O,
                        b'p' => Element::P,
                        b's' => Element::S,
                        _ => return Err(syntax(sym_at, SyntaxIssue::UnknownElement((c as char).to_string()))),
                    };
                    self.i += 1;
                    (e, true)
                }
            }
        } else if c == b'*' {
            return Err(syntax(sym_at, SyntaxIssue::Unsupported("wildcard atom")));
        } else {
            return Err(unterminated(self));
        };

        let mut chirality = None;
        if self.peek(0) == Some(b'@') {
            let start = self.i;
            self.i += 1;
            if self.peek(0) == Some(b'@') {
                self.i += 1;
            } else if let (Some(a), Some(b)) = (self.peek(0), self.peek(1)) {
                let tag = [a, b];
                if matches!(&tag, b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
                    self.i += 2;
                    if self.read_number(2).is_none() {
                        return Err(syntax(self.i, SyntaxIssue::BadBracket));
                    }
                }
            }
            chirality = Some(String::from_utf8_lossy(&self.s[start..self.i]).into_owned());
        }

        let mut bracket_h = 0u8;
        if self.peek(0) == Some(b'H') {
            self.i += 1;
            bracket_h = match self.peek(0) {
                Some(d) if d.is_ascii_digit() => {
                    self.i += 1;
                    d - b'0'
                }
                _ => 1,
            };
        }

        let mut charge: i8 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek(0) {
            self.i += 1;
            let unit: i8 = if sign == b'+' { 1 } else { -1 };
            if self.peek(0).is_some_and(|d| d.is_ascii_digit()) {
                let v = self.read_number(2).ok_or_else(|| syntax(self.i, SyntaxIssue::BadBracket))?;
                if v > 15 {
                    return Err(syntax(self.i, SyntaxIssue::BadBracket));
                }
                charge = unit * v as i8;
            } else {
                charge = unit;
                while self.peek(0) == Some(sign) {
                    self.i += 1;
                    charge += unit;
                    if charge.abs() > 15 {
                        return Err(syntax(self.i, SyntaxIssue::BadBracket));
                    }
                }
            }
        }

        if self.peek(0) == Some(b':') {
            self.i += 1;
            if self.read_number(6).is_none() {
                return Err(unterminated(self));
            }
        }

        if self.peek(0) != Some(b']') {
            return Err(unterminated(self));
        }
        self.i += 1;

        Ok(RawAtom {
            element,
            aromatic,
            charge,
            bracket_h: Some(bracket_h),
            isotope,
            chirality,
            offset: open,
        })
    }
}

fn spec_order(spec: BondSpec) -> u8 {
    match spec {
        BondSpec::Double => 2,
        BondSpec::Triple => 3,
        _ => 1,
    }
}

/// Turns the raw token graph into a checked `MolGraph`: resolves implicit
/// bonds, kekulizes aromatic input, assigns hydrogens, folds explicit `[H]`
/// atoms and perceives aromaticity on the result.
fn build(raw_atoms: Vec<RawAtom>, raw_bonds: Vec<RawBond>) -> Result<MolGraph, SmilesError> {
    let n = raw_atoms.len();
    let mut specs: Vec<BondSpec> = raw_bonds
        .iter()
        .map(|b| match b.spec {
            BondSpec::Implicit if raw_atoms[b.a].aromatic && raw_atoms[b.b].aromatic => BondSpec::Aromatic,
            BondSpec::Implicit => BondSpec::Single,
            BondSpec::Aromatic if !(raw_atoms[b.a].aromatic && raw_atoms[b.b].aromatic) => BondSpec::Single,
            s => s,
        })
        .collect();

    let pairs: Vec<(usize, usize)> = raw_bonds.iter().map(|b| (b.a, b.b)).collect();
    let rings = find_sssr(n, &pairs);
    let mut bond_in_ring = vec![false; pairs.len()];
    let mut atom_in_ring = vec![false; n];
    for r in &rings {
        for &b in &r.bonds {
            bond_in_ring[b] = true;
        }
        for &a in &r.atoms {
            atom_in_ring[a] = true;
        }
    }
    for (i, s) in specs.iter_mut().enumerate() {
        if *s == BondSpec::Aromatic && !bond_in_ring[i] {
            *s = BondSpec::Single;
        }
    }
    for (i, a) in raw_atoms.iter().enumerate() {
        if a.aromatic && !atom_in_ring[i] {
            return Err(valence(a.offset, ValenceIssue::AromaticOutsideRing));
        }
    }

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &(a, b)) in pairs.iter().enumerate() {
        adjacency[a].push(i);
        adjacency[b].push(i);
    }

    // which aromatic atoms still need a double bond inside the aromatic system
    let mut needs_double = vec![false; n];
    for (i, atom) in raw_atoms.iter().enumerate() {
        if !atom.aromatic {
            continue;
        }
        let mut s1: u32 = 0;
        for &b in &adjacency[i] {
            s1 += match specs[b] {
                BondSpec::Aromatic => 1,
                s => spec_order(s) as u32,
            };
        }
        s1 += atom.bracket_h.unwrap_or(0) as u32;
        let valences: &[u8] = match atom.bracket_h {
            Some(_) => match atom.element.allowed_valences(atom.charge) {
                Some(v) => v,
                None => continue,
            },
            None => atom.element.default_valences(),
        };
        let v = valences
            .iter()
            .map(|&v| v as u32)
            .find(|&v| v >= s1)
            .ok_or_else(|| {
                valence(
                    atom.offset,
                    ValenceIssue::Exceeded { element: atom.element, charge: atom.charge, valence: s1 },
                )
            })?;
        needs_double[i] = v > s1;
    }

    let aromatic_edges: Vec<(usize, usize, usize)> = specs
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == BondSpec::Aromatic)
        .map(|(i, _)| (i, pairs[i].0, pairs[i].1))
        .collect();
    let doubled = kekulize(n, &needs_double, &aromatic_edges).map_err(|atom| {
        valence(raw_atoms[atom].offset, ValenceIssue::Kekulization)
    })?;
    let mut kekule: Vec<u8> = specs.iter().map(|&s| spec_order(s)).collect();
    for b in doubled {
        kekule[b] = 2;
    }

    // hydrogens and valence
    let mut h_counts = vec![0u8; n];
    for (i, atom) in raw_atoms.iter().enumerate() {
        let sum: u32 = adjacency[i].iter().map(|&b| kekule[b] as u32).sum();
        match atom.bracket_h {
            Some(h) => {
                let total = sum + h as u32;
                if let Some(list) = atom.element.allowed_valences(atom.charge) {
                    let max = *list.last().unwrap() as u32;
                    if total > max {
                        return Err(valence(
                            atom.offset,
                            ValenceIssue::Exceeded { element: atom.element, charge: atom.charge, valence: total },
                        ));
                    }
                }
                h_counts[i] = h;
            }
            None => {
                let v = atom
                    .element
                    .default_valences()
                    .iter()
                    .map(|&v| v as u32)
                    .find(|&v| v >= sum)
                    .ok_or_else(|| {
                        valence(atom.offset, ValenceIssue::Exceeded { element: atom.element, charge: 0, valence: sum })
                    })?;
                h_counts[i] = (v - sum) as u8;
            }
        }
    }

    // fold plain explicit hydrogens into their neighbour
    let mut removed = vec![false; n];
    for (i, atom) in raw_atoms.iter().enumerate() {
        if atom.element == Element::H
            && atom.isotope.is_none()
            && atom.charge == 0
            && h_counts[i] == 0
            && adjacency[i].len() == 1
        {
            let b = adjacency[i][0];
            let other = if pairs[b].0 == i { pairs[b].1 } else { pairs[b].0 };
            if raw_atoms[other].element != Element::H && kekule[b] == 1 && !removed[other] {
                removed[i] = true;
                h_counts[other] = h_counts[other].saturating_add(1);
            }
        }
    }
    let mut new_index = vec![usize::MAX; n];
    let mut kept = 0;
    for i in 0..n {
        if !removed[i] {
            new_index[i] = kept;
            kept += 1;
        }
    }
    let mut bond_index = vec![usize::MAX; pairs.len()];
    let mut new_pairs = Vec::new();
    let mut new_kekule = Vec::new();
    let mut new_stereo = Vec::new();
    for (i, &(a, b)) in pairs.iter().enumerate() {
        if removed[a] || removed[b] {
            continue;
        }
        bond_index[i] = new_pairs.len();
        new_pairs.push((new_index[a], new_index[b]));
        new_kekule.push(kekule[i]);
        new_stereo.push(raw_bonds[i].stereo);
    }
    let rings: Vec<Ring> = rings
        .into_iter()
        .map(|r| Ring {
            atoms: r.atoms.iter().map(|&a| new_index[a]).collect(),
            bonds: r.bonds.iter().map(|&b| bond_index[b]).collect(),
        })
        .collect();

    let mut atoms: Vec<Atom> = Vec::with_capacity(kept);
    for (i, a) in raw_atoms.into_iter().enumerate() {
        if removed[i] {
            continue;
        }
        atoms.push(Atom {
            index: atoms.len(),
            element: a.element,
            is_aromatic: false,
            formal_charge: a.charge,
            implicit_h_count: h_counts[i],
            isotope: a.isotope,
            chirality: a.chirality,
            offset: a.offset,
        });
    }

    let (arom_atoms, arom_bonds) = perceive_aromaticity(&atoms, &new_pairs, &new_kekule, &rings);
    for (a, flag) in atoms.iter_mut().zip(arom_atoms) {
        a.is_aromatic = flag;
    }
    let bonds: Vec<Bond> = new_pairs
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Bond {
            begin: a,
            end: b,
            order: if arom_bonds[i] {
                BondOrder::Aromatic
            } else {
                match new_kekule[i] {
                    2 => BondOrder::Double,
                    3 => BondOrder::Triple,
                    _ => BondOrder::Single,
                }
            },
            kekule_order: new_kekule[i],
            stereo: new_stereo[i],
        })
        .collect();
    Ok(MolGraph::assemble(atoms, bonds, rings))
}
