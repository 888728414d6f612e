use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use once_cell::sync::Lazy;
use thiserror::Error;

use super::crippen::{heavy_atom_type, hydrogen_type};
use super::tpsa::{contribution, parse_key, TpsaRow};
use super::PropertyError;
use crate::molgraph::{Element, MolGraph};

const CRIPPEN_TSV: &str = include_str!("../../data/crippen.tsv");
const TPSA_TSV: &str = include_str!("../../data/ertl_tpsa.tsv");

/// Every type name the atom typer can emit; a Crippen table must define all.
const CRIPPEN_TYPES: &[&str] = &[
    "C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10", "C11", "C12", "C13", "C14", "C15", "C16", "C17",
    "C18", "C19", "C20", "C21", "C22", "C23", "C24", "C25", "C26", "C27", "CS", "H1", "H2", "H3", "H4", "HS", "N1",
    "N2", "N3", "N4", "N5", "N6", "N7", "N8", "N9", "N10", "N11", "N12", "N13", "N14", "NS", "O1", "O2", "O3", "O4",
    "O5", "O6", "O7", "O8", "O9", "O10", "O11", "O12", "OS", "F", "Cl", "Br", "I", "Hal", "P", "S1", "S2", "S3",
];

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("Crippen table has no row for type {0}")]
    MissingType(String),
}

/// Contribution tables for logP and tPSA. Immutable once built.
#[derive(Debug, Clone)]
pub struct PropertyTables {
    crippen: Vec<(String, f64)>,
    crippen_index: HashMap<String, usize>,
    tpsa: Vec<TpsaRow>,
}

static EMBEDDED: Lazy<PropertyTables> =
    Lazy::new(|| PropertyTables::parse(CRIPPEN_TSV, TPSA_TSV).expect("embedded property tables are valid"));

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let t = l.trim_end();
        if t.trim().is_empty() || t.trim_start().starts_with('#') {
            None
        } else {
            Some((i + 1, t.split('\t').collect()))
        }
    })
}

impl PropertyTables {
    /// Tables shipped inside the crate.
    pub fn embedded() -> &'static PropertyTables {
        &EMBEDDED
    }

    pub fn parse(crippen_text: &str, tpsa_text: &str) -> Result<Self, TableError> {
        let mut crippen = Vec::new();
        let mut crippen_index = HashMap::new();
        for (line, cols) in data_lines(crippen_text) {
            if cols.len() != 3 {
                return Err(TableError::Parse { line, reason: format!("expected 3 columns, found {}", cols.len()) });
            }
            let value: f64 = cols[2]
                .trim()
                .parse()
                .map_err(|_| TableError::Parse { line, reason: format!("bad contribution {:?}", cols[2]) })?;
            crippen_index.insert(cols[0].trim().to_string(), crippen.len());
            crippen.push((cols[0].trim().to_string(), value));
        }
        for t in CRIPPEN_TYPES {
            if !crippen_index.contains_key(*t) {
                return Err(TableError::MissingType(t.to_string()));
            }
        }
        let mut tpsa = Vec::new();
        for (line, cols) in data_lines(tpsa_text) {
            if cols.len() != 3 {
                return Err(TableError::Parse { line, reason: format!("expected 3 columns, found {}", cols.len()) });
            }
            let (element, fields) = parse_key(cols[0].trim())
                .ok_or_else(|| TableError::Parse { line, reason: format!("bad key {:?}", cols[0]) })?;
            let value: f64 = cols[2]
                .trim()
                .parse()
                .map_err(|_| TableError::Parse { line, reason: format!("bad contribution {:?}", cols[2]) })?;
            tpsa.push(TpsaRow { element, fields, pattern: cols[1].trim().to_string(), value });
        }
        Ok(PropertyTables { crippen, crippen_index, tpsa })
    }

    /// Loads tables from files, falling back to the embedded copy for any
    /// path not given.
    pub fn load(crippen: Option<&Path>, tpsa: Option<&Path>) -> Result<Self, TableError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| TableError::Io { path: p.to_path_buf(), source })
        };
        let c = match crippen {
            Some(p) => read(p)?,
            None => CRIPPEN_TSV.to_string(),
        };
        let t = match tpsa {
            Some(p) => read(p)?,
            None => TPSA_TSV.to_string(),
        };
        PropertyTables::parse(&c, &t)
    }

    pub fn crippen_contribution(&self, type_name: &str) -> Option<f64> {
        self.crippen_index.get(type_name).map(|&i| self.crippen[i].1)
    }

    /// Number of atoms (hydrogens included) assigned to each Crippen type,
    /// in table order; types with no atoms are omitted.
    pub fn crippen_type_counts(&self, mol: &MolGraph) -> Result<Vec<(String, u32)>, PropertyError> {
        let mut counts = vec![0u32; self.crippen.len()];
        let mut bump = |t: &str| counts[self.crippen_index[t]] += 1;
        for atom in mol.atoms() {
            let a = atom.index;
            if atom.element == Element::H {
                let heavy = mol.neighbors(a).first().map(|&(v, _)| v);
                bump(hydrogen_type(mol, heavy, Some(a)));
                continue;
            }
            let t = heavy_atom_type(mol, a)
                .ok_or(PropertyError::UnclassifiableAtom { index: a, element: atom.element })?;
            bump(t);
            if atom.implicit_h_count > 0 {
                let ht = hydrogen_type(mol, Some(a), None);
                for _ in 0..atom.implicit_h_count {
                    bump(ht);
                }
            }
        }
        Ok(self
            .crippen
            .iter()
            .zip(counts)
            .filter(|(_, c)| *c > 0)
            .map(|((name, _), c)| (name.clone(), c))
            .collect())
    }

    /// Sum of atom contributions, accumulated type by type in table order.
    pub fn crippen_logp(&self, mol: &MolGraph) -> Result<f64, PropertyError> {
        let counts = self.crippen_type_counts(mol)?;
        Ok(counts
            .iter()
            .map(|(t, c)| *c as f64 * self.crippen_contribution(t).unwrap())
            .sum())
    }

    pub fn tpsa(&self, mol: &MolGraph, include_s_p: bool) -> f64 {
        let mut total = 0.0;
        for a in 0..mol.atom_count() {
            match contribution(&self.tpsa, mol, a, include_s_p) {
                Some(v) => total += v,
                None => log::debug!(
                    "no tPSA fragment for {} atom {a}; contributing 0",
                    mol.atoms()[a].element
                ),
            }
        }
        total
    }
}
