//! Offline stand-in for a generative model: seeded graph edits of the
//! prompt's example molecules, biased toward the most active ones.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use serde_json::json;

use super::backend::Task;
use super::prompt::parse_example_line;
use crate::features::{circular_fingerprint, stable_hash, Fingerprint, tanimoto_similarity, DEFAULT_FP_BITS, DEFAULT_FP_RADIUS};
use crate::molgraph::edit::EditableMol;
use crate::molgraph::{canonical_ranks, parse_smiles, to_canonical, Element, MolGraph};
use crate::properties::crippen_logp;

/// Groups the mutator may attach; the first atom bonds to the target.
pub const MOCK_SUBSTITUENTS: &[&str] = &["C", "O", "N", "F", "Cl", "OC", "C(F)(F)F", "C#N", "C(N)=O", "CC"];
const SWAP_ELEMENTS: [Element; 6] = [Element::C, Element::N, Element::O, Element::S, Element::F, Element::CL];
const LEAD_SHARE: f64 = 0.25;
/// Mutants drafted per returned molecule; the one with the best
/// nearest-neighbour activity estimate is kept.
const DRAFTS: usize = 6;
const ATTEMPTS: usize = 50;
const MIN_HEAVY: usize = 5;
const MAX_HEAVY: usize = 70;

fn free_valence(e: &EditableMol, i: usize) -> i32 {
    let a = &e.atoms[i];
    if a.charge != 0 || a.explicit_h.is_some() {
        return 0;
    }
    a.element.default_valences().first().copied().unwrap_or(0) as i32 - e.bond_order_sum(i) as i32
}

fn substitute(e: &mut EditableMol, rng: &mut ChaCha8Rng) -> bool {
    let i = rng.gen_range(0..e.atoms.len());
    let a = &e.atoms[i];
    if a.charge != 0 || a.explicit_h.is_some() || !SWAP_ELEMENTS.contains(&a.element) {
        return false;
    }
    let used = e.bond_order_sum(i);
    let choices: Vec<Element> = SWAP_ELEMENTS
        .iter()
        .copied()
        .filter(|&el| el != a.element && el.default_valences()[0] as u32 >= used)
        .collect();
    match choices.choose(rng) {
        Some(&el) => {
            e.atoms[i].element = el;
            true
        }
        None => false,
    }
}

fn attach(e: &mut EditableMol, at: usize, group: &str) -> bool {
    let Ok(g) = parse_smiles(group) else { return false };
    let g = EditableMol::from_graph(&g);
    let off = e.atoms.len();
    e.atoms.extend(g.atoms);
    for b in g.bonds {
        e.add_bond(b.a + off, b.b + off, b.order);
    }
    e.add_bond(at, off, 1);
    true
}

fn add_substituent(e: &mut EditableMol, rng: &mut ChaCha8Rng) -> bool {
    let sites: Vec<usize> = (0..e.atoms.len()).filter(|&i| free_valence(e, i) >= 1).collect();
    match sites.choose(rng) {
        Some(&at) => attach(e, at, MOCK_SUBSTITUENTS.choose(rng).expect("non-empty")),
        None => false,
    }
}

fn remove_terminal(e: &mut EditableMol, rng: &mut ChaCha8Rng) -> bool {
    let leaves: Vec<usize> = (0..e.atoms.len()).filter(|&i| e.degree(i) == 1).collect();
    match leaves.choose(rng) {
        Some(&i) if e.atoms.len() > MIN_HEAVY => {
            e.remove_atom(i);
            true
        }
        _ => false,
    }
}

fn acceptable(smiles: &str) -> Option<MolGraph> {
    let m = parse_smiles(smiles).ok()?;
    let n = m.heavy_atom_count();
    (m.is_single_fragment() && (MIN_HEAVY..=MAX_HEAVY).contains(&n) && crippen_logp(&m).is_ok()).then_some(m)
}

fn mutate(src: &MolGraph, edits: usize, rng: &mut ChaCha8Rng) -> Option<String> {
    let mut e = EditableMol::from_graph(src);
    let mut done = 0;
    let mut tries = 0;
    while done < edits && tries < edits * 10 {
        tries += 1;
        let ok = match rng.gen_range(0..20) {
            0..=9 => add_substituent(&mut e, rng),
            10..=14 => substitute(&mut e, rng),
            _ => remove_terminal(&mut e, rng),
        };
        done += ok as usize;
    }
    if done < edits {
        return None;
    }
    acceptable(&e.to_smiles()).map(|m| to_canonical(&m).into_string())
}

/// `batch_size` canonical SMILES, each a seeded edit of an example (picked
/// with weight proportional to activity rank, best first) or of the lead.
/// The number of edits per molecule is a binomial draw over the heavy atoms
/// at `mutation_rate`, at least one; a rate of zero returns plain copies.
/// Edits that fail validation are retried and after a bounded number of
/// attempts the unmodified source is emitted instead.
pub fn mock_generate(
    examples: &[(MolGraph, f64)],
    lead: Option<&MolGraph>,
    batch_size: usize,
    seed: u64,
    mutation_rate: f64,
) -> Vec<String> {
    if examples.is_empty() && lead.is_none() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by(|&a, &b| examples[b].1.total_cmp(&examples[a].1).then(a.cmp(&b)));
    let n = order.len();
    let weights = (n > 0).then(|| WeightedIndex::new((0..n).map(|r| (n - r) as f64)).expect("positive weights"));
    let rate = mutation_rate.clamp(0.0, 1.0);
    let knn = Knn::new(examples);
    let mut out = Vec::with_capacity(batch_size);
    while out.len() < batch_size {
        let src = match (&weights, lead) {
            (Some(w), Some(l)) => {
                if rng.gen_bool(LEAD_SHARE) {
                    l
                } else {
                    &examples[order[w.sample(&mut rng)]].0
                }
            }
            (Some(w), None) => &examples[order[w.sample(&mut rng)]].0,
            (None, Some(l)) => l,
            (None, None) => unreachable!(),
        };
        if rate == 0.0 {
            out.push(to_canonical(src).into_string());
            continue;
        }
        let heavy = src.heavy_atom_count() as u64;
        let mut made: Option<(String, f64)> = None;
        for _ in 0..DRAFTS {
            for _ in 0..ATTEMPTS {
                let edits = (Binomial::new(heavy, rate).expect("rate in [0, 1]").sample(&mut rng) as usize).max(1);
                if let Some(s) = mutate(src, edits, &mut rng) {
                    let score = parse_smiles(&s).ok().and_then(|m| knn.estimate(&m)).unwrap_or(f64::NEG_INFINITY);
                    if made.as_ref().map_or(true, |(_, best)| score > *best) {
                        made = Some((s, score));
                    }
                    break;
                }
            }
        }
        let made = made.map(|(s, _)| s);
        out.push(made.unwrap_or_else(|| to_canonical(src).into_string()));
    }
    out
}

fn line_value<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

fn prompt_examples(prompt: &str) -> Vec<(MolGraph, f64)> {
    prompt
        .lines()
        .filter_map(parse_example_line)
        .filter_map(|(s, a, _)| Some((parse_smiles(&s).ok()?, a)))
        .collect()
}

/// Nearest-neighbour activity guess: similarity-weighted mean over the five
/// most similar examples.
struct Knn {
    fps: Vec<(Fingerprint, f64)>,
}

impl Knn {
    fn new(examples: &[(MolGraph, f64)]) -> Self {
        Knn { fps: examples.iter().filter_map(|(m, a)| Some((fingerprint(m)?, *a))).collect() }
    }

    fn estimate(&self, query: &MolGraph) -> Option<f64> {
        let q = fingerprint(query)?;
        let mut sims: Vec<(f64, f64)> =
            self.fps.iter().filter_map(|(f, a)| Some((tanimoto_similarity(&q, f).ok()?, *a))).collect();
        if sims.is_empty() {
            return None;
        }
        sims.sort_by(|x, y| y.0.total_cmp(&x.0));
        sims.truncate(5);
        let w: f64 = sims.iter().map(|s| s.0 + 1e-6).sum();
        Some(sims.iter().map(|s| (s.0 + 1e-6) * s.1).sum::<f64>() / w)
    }
}

fn fingerprint(m: &MolGraph) -> Option<Fingerprint> {
    circular_fingerprint(m, DEFAULT_FP_RADIUS, DEFAULT_FP_BITS).ok()
}

const KEYWORD_GROUPS: &[(&str, &str)] = &[
    ("trifluoromethyl", "C(F)(F)F"),
    ("methoxy", "OC"),
    ("hydroxy", "O"),
    ("alcohol", "O"),
    ("cyano", "C#N"),
    ("nitrile", "C#N"),
    ("amide", "C(N)=O"),
    ("amin", "N"),
    ("fluor", "F"),
    ("chlor", "Cl"),
    ("ethyl", "CC"),
    ("methyl", "C"),
];

/// Deterministic reading of a modification instruction: recognised group
/// names are attached at the first free site in canonical order (aromatic
/// atoms first), "remove" drops a terminal atom, anything else gets one
/// seeded random edit.
fn mock_modify(mol: &MolGraph, instruction: &str) -> Option<String> {
    let text = instruction.to_lowercase();
    if ["unchanged", "identity", "keep the molecule", "no change"].iter().any(|k| text.contains(k)) {
        return Some(to_canonical(mol).into_string());
    }
    let ranks = canonical_ranks(mol);
    let mut by_rank: Vec<usize> = (0..mol.atom_count()).collect();
    by_rank.sort_by_key(|&i| (!mol.atoms()[i].is_aromatic, ranks[i]));
    let mut e = EditableMol::from_graph(mol);
    if text.contains("remove") || text.contains("delete") {
        let leaf = by_rank.iter().copied().find(|&i| e.degree(i) == 1 && e.atoms.len() > 1)?;
        e.remove_atom(leaf);
        return acceptable(&e.to_smiles()).map(|m| to_canonical(&m).into_string());
    }
    if let Some(&(_, group)) = KEYWORD_GROUPS.iter().find(|(k, _)| text.contains(k)) {
        let site = by_rank.iter().copied().find(|&i| free_valence(&e, i) >= 1)?;
        attach(&mut e, site, group);
        let m = parse_smiles(&e.to_smiles()).ok()?;
        return Some(to_canonical(&m).into_string());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(text.as_bytes()));
    (0..ATTEMPTS).find_map(|_| mutate(mol, 1, &mut rng))
}

/// What the mock backend answers for a prompt built by this module.
pub(crate) fn mock_respond(prompt: &str, task: Task, seed: u64, mutation_rate: f64) -> String {
    match task {
        Task::Generate => {
            let examples = prompt_examples(prompt);
            let lead = line_value(prompt, "Lead molecule:").and_then(|s| parse_smiles(s).ok());
            let n = line_value(prompt, "Propose ")
                .and_then(|s| s.split_whitespace().next())
                .and_then(|s| s.parse().ok())
                .unwrap_or(10usize);
            let seed = seed ^ stable_hash(prompt.as_bytes());
            let mols = mock_generate(&examples, lead.as_ref(), n, seed, mutation_rate);
            let arr: Vec<_> = mols.iter().map(|s| json!({ "smiles": s })).collect();
            format!("Here are the proposed molecules:\n{}", serde_json::Value::Array(arr))
        }
        Task::Predict => {
            let examples = prompt_examples(prompt);
            match line_value(prompt, "Query molecule:").and_then(|s| parse_smiles(s).ok()) {
                Some(q) => match Knn::new(&examples).estimate(&q) {
                    Some(a) => json!({ "activity": a }).to_string(),
                    None => "I cannot estimate the activity of this molecule.".into(),
                },
                None => "The query molecule could not be read.".into(),
            }
        }
        Task::Modify => {
            let mol = line_value(prompt, "Molecule:").and_then(|s| parse_smiles(s).ok());
            let instruction = line_value(prompt, "Instruction:").unwrap_or("");
            match mol.and_then(|m| mock_modify(&m, instruction)) {
                Some(s) => json!({ "smiles": s }).to_string(),
                None => "I could not apply that change.".into(),
            }
        }
    }
}
