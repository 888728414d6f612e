//! Seeded combinatorial library of small drug-like molecules, used as a
//! stand-in corpus for tests, demos and the command line.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ActivityRecord;
use crate::molgraph::{parse_smiles, to_canonical};
use crate::properties::{crippen_logp, ertl_tpsa, molecular_weight};

// `{a}`/`{b}`: ring-closure digits, `{s}`: optional side group written as a
// branch, `{n}`: continuation of the chain.
const CORES: &[&str] = &[
    "c{a}cc{s}c({n})cc{a}",
    "c{a}ccc({n})cc{a}{s}",
    "c{a}cnc{s}c({n})c{a}",
    "c{a}cc{s}c({n})s{a}",
    "c{a}cc{s}c({n})o{a}",
    "C{a}CC{s}C({n})CC{a}",
    "C{a}CN({n})CC{s}C{a}",
    "N{a}CCN({n})CC{a}",
    "C{a}COCC{s}N{a}{n}",
    "c{a}ccc{b}cc({n})ccc{b}c{a}",
    "c{a}ccc{b}[nH]c({n})nc{b}c{a}",
    "c{a}nc{s}cc({n})n{a}",
    "C{a}CC({n})C{a}",
    "c{a}ccc{b}c(c{a})CCN{b}{n}",
];

const LINKERS: &[&str] = &["", "C", "CC", "C(=O)N", "NC(=O)", "O", "OC", "S(=O)(=O)N", "C(=O)", "N", "CN", "CO", "C=C"];

const SIDES: &[&str] = &[
    "", "", "F", "Cl", "Br", "C", "CC", "OC", "C(F)(F)F", "O", "N", "C#N", "C(=O)O", "N(C)C", "C(C)C", "C(N)=O",
    "S(C)(=O)=O", "C{a}CC{a}",
];

const PREFIXES: &[&str] = &[
    "", "", "C", "CC", "CO", "N#C", "FC(F)(F)", "CC(C)", "OC(=O)", "CN(C)", "Cl", "F", "Br", "O", "N", "CS(=O)(=O)",
    "NC(=O)", "CCO",
];

struct Digits(u8);

impl Digits {
    fn take(&mut self) -> String {
        self.0 += 1;
        if self.0 < 10 {
            self.0.to_string()
        } else {
            format!("%{}", self.0)
        }
    }
}

fn fill(template: &str, digits: &mut Digits, side: &str, next: &str) -> String {
    let mut out = template.to_string();
    if out.contains("{a}") {
        out = out.replace("{a}", &digits.take());
    }
    if out.contains("{b}") {
        out = out.replace("{b}", &digits.take());
    }
    let side = if side.is_empty() { String::new() } else { format!("({side})") };
    out = out.replace("{s}", &side);
    if out.contains("({n})") && next.is_empty() {
        out = out.replace("({n})", "");
    }
    out.replace("{n}", next)
}

fn group(template: &str, digits: &mut Digits) -> String {
    fill(template, digits, "", "")
}

fn assemble<R: Rng>(rng: &mut R) -> String {
    let mut digits = Digits(0);
    let prefix = group(PREFIXES.choose(rng).unwrap(), &mut digits);
    let core1 = CORES.choose(rng).unwrap();
    let two_cores = rng.gen_bool(0.7);
    let side1 = group(SIDES.choose(rng).unwrap(), &mut digits);
    let next = if two_cores {
        let linker = LINKERS.choose(rng).unwrap();
        let core2 = CORES.choose(rng).unwrap();
        let side2 = group(SIDES.choose(rng).unwrap(), &mut digits);
        let tail = group(SIDES.choose(rng).unwrap(), &mut digits);
        format!("{linker}{}", fill(core2, &mut digits, &side2, &tail))
    } else {
        group(SIDES.choose(rng).unwrap(), &mut digits)
    };
    format!("{prefix}{}", fill(core1, &mut digits, &side1, &next))
}

/// `n` distinct canonical SMILES, deterministic in `seed`. Candidates that
/// fail to parse, fail property typing or repeat are redrawn.
pub fn synthetic_library(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < n * 200 + 1000 {
        attempts += 1;
        let smiles = assemble(&mut rng);
        let Ok(mol) = parse_smiles(&smiles) else { continue };
        if !mol.is_single_fragment() || crippen_logp(&mol).is_err() {
            continue;
        }
        let canon = to_canonical(&mol).into_string();
        if seen.insert(canon.clone()) {
            out.push(canon);
        }
    }
    out
}

/// Hidden structure-activity rule used for synthetic targets, in pCHEMBL-like
/// units before noise.
pub fn synthetic_activity_signal(smiles: &str) -> Option<f64> {
    let mol = parse_smiles(smiles).ok()?;
    let mw = molecular_weight(&mol);
    let logp = crippen_logp(&mol).ok()?;
    let tpsa = ertl_tpsa(&mol);
    Some(3.0 + 0.011 * mw + 0.3 * logp - 0.006 * tpsa)
}

/// Synthetic activity dataset: the library of [`synthetic_library`] labelled
/// by [`synthetic_activity_signal`] plus Gaussian noise of width `noise`,
/// clamped to `[4, 12]`.
pub fn synthetic_records(n: usize, noise: f64, seed: u64) -> Vec<ActivityRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_ac71);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise");
    synthetic_library(n, seed)
        .into_iter()
        .filter_map(|s| {
            let base = synthetic_activity_signal(&s)?;
            let activity = (base + normal.sample(&mut rng)).clamp(4.0, 12.0);
            Some(ActivityRecord::new(s, activity))
        })
        .collect()
}
