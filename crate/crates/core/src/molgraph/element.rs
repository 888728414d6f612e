use std::fmt;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

const ATOMIC_WEIGHTS_TSV: &str = include_str!("../../data/atomic_weights.tsv");

struct ElementRow {
    symbol: &'static str,
    weight: f64,
}

static ELEMENTS: Lazy<Vec<ElementRow>> = Lazy::new(|| {
    let mut rows = Vec::with_capacity(118);
    for line in ATOMIC_WEIGHTS_TSV.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let z: usize = cols.next().and_then(|c| c.parse().ok()).expect("atomic number");
        let symbol = cols.next().expect("symbol");
        let weight: f64 = cols.next().and_then(|c| c.parse().ok()).expect("weight");
        assert_eq!(z, rows.len() + 1, "atomic weight table must be ordered by atomic number");
        rows.push(ElementRow { symbol, weight });
    }
    rows
});

/// A chemical element, stored as its atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Element(u8);

impl Element {
    pub const H: Element = Element(1);
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const SI: Element = Element(14);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const SE: Element = Element(34);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    pub fn from_atomic_number(z: u8) -> Option<Element> {
        if z >= 1 && (z as usize) <= ELEMENTS.len() {
            Some(Element(z))
        } else {
            None
        }
    }

    /// Looks up a symbol with standard capitalization ("C", "Cl", "Se").
    pub fn from_symbol(symbol: &str) -> Option<Element> {
        ELEMENTS
            .iter()
            .position(|row| row.symbol == symbol)
            .map(|i| Element(i as u8 + 1))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        ELEMENTS[self.0 as usize - 1].symbol
    }

    /// Standard atomic weight in g/mol.
    pub fn weight(self) -> f64 {
        ELEMENTS[self.0 as usize - 1].weight
    }

    pub fn is_organic_subset(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 9 | 15 | 16 | 17 | 35 | 53)
    }

    /// Elements that may be written as lowercase aromatic symbols.
    pub fn can_be_aromatic(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 15 | 16 | 33 | 34 | 52)
    }

    pub fn is_halogen(self) -> bool {
        matches!(self.0, 9 | 17 | 35 | 53)
    }

    /// Main-group column (13..=18) for the p-block elements we have
    /// valence rules for, plus hydrogen as group 1.
    fn group(self) -> Option<u8> {
        Some(match self.0 {
            1 => 1,
            5 | 13 => 13,
            6 | 14 | 32 => 14,
            7 | 15 | 33 => 15,
            8 | 16 | 34 | 52 => 16,
            9 | 17 | 35 | 53 => 17,
            _ => return None,
        })
    }

    fn is_second_period(self) -> bool {
        (3..=10).contains(&self.0)
    }

    /// Allowed total valences (bond-order sum plus hydrogens) for this element
    /// with the given formal charge, smallest first. `None` means no rule is
    /// known and any valence is accepted.
    pub fn allowed_valences(self, charge: i8) -> Option<&'static [u8]> {
        if self == Element::H {
            return match charge {
                0 => Some(&[1]),
                1 | -1 => Some(&[0]),
                _ => None,
            };
        }
        let group = self.group()? as i16;
        // isoelectronic shift: N+ behaves like C, O- like F, C- like N
        let effective = group - charge as i16;
        let second = self.is_second_period();
        let list: &'static [u8] = match (effective, second) {
            (12, _) => &[2],
            (13, _) => &[3],
            (14, _) => &[4],
            (15, true) => &[3],
            (15, false) => &[3, 5],
            (16, true) => &[2],
            (16, false) => &[2, 4, 6],
            (17, true) => &[1],
            (17, false) if self == Element::I => &[1, 3, 5],
            (17, false) => &[1],
            (18, _) => &[0],
            _ => return None,
        };
        Some(list)
    }

    /// Default valences used for implicit hydrogens on unbracketed atoms.
    pub fn default_valences(self) -> &'static [u8] {
        match self.0 {
            5 => &[3],
            6 => &[4],
            7 => &[3],
            8 => &[2],
            15 => &[3, 5],
            16 => &[2, 4, 6],
            9 | 17 | 35 => &[1],
            53 => &[1, 3, 5],
            _ => &[],
        }
    }

    pub fn is_electronegative(self) -> bool {
        matches!(self.0, 7 | 8 | 16)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
