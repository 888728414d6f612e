use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{circular_environments, FeatureError};
use crate::molgraph::MolGraph;
use crate::properties::sascore::raw_sa_components;
use crate::stats::percentile_linear;

const FORMAT_TAG: &str = "leadopt-fragment-vocabulary v1";

/// Headroom above the corpus 99th-percentile raw SA score; keeps common
/// corpus chemistry near, but not pinned to, the easy end.
const EASY_MARGIN: f64 = 0.75;

/// Mean of fragment-token vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

/// Corpus anchors for the SA-score rescale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaCalibration {
    /// Fragment count at which 80% of all fragment occurrences are covered;
    /// fragments this frequent score 0.
    pub anchor: f64,
    /// Raw score mapped to the hard end of the scale.
    pub lo: f64,
    /// Raw score mapped to the easy end of the scale.
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramParams {
    pub radius: u32,
    pub dim: usize,
    pub seed: u64,
    pub epochs: usize,
    pub negatives: usize,
    /// Context tokens sampled per centre token from the molecule.
    pub contexts: usize,
    pub learning_rate: f64,
}

impl Default for SkipGramParams {
    fn default() -> Self {
        SkipGramParams {
            radius: super::DEFAULT_VOCAB_RADIUS,
            dim: super::DEFAULT_EMBED_DIM,
            seed: 0,
            epochs: 5,
            negatives: 5,
            contexts: 5,
            learning_rate: 0.025,
        }
    }
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("vocabulary file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Fragment identifier → (corpus count, embedding).
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentVocabulary {
    radius: u32,
    dim: usize,
    seed: u64,
    corpus_size: usize,
    sa: SaCalibration,
    ids: Vec<u64>,
    counts: Vec<u64>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<u64, usize>,
}

/// Environment identifiers of a molecule, radius-major, deduplicated as in
/// the fingerprint but not folded.
pub fn fragment_tokens(mol: &MolGraph, radius: u32) -> Vec<u64> {
    circular_environments(mol, radius).into_iter().map(|e| e.id).collect()
}

impl FragmentVocabulary {
    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn sa_calibration(&self) -> SaCalibration {
        self.sa
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn count(&self, id: u64) -> Option<u64> {
        self.index.get(&id).map(|&i| self.counts[i])
    }

    pub fn vector(&self, id: u64) -> Option<&[f64]> {
        self.index.get(&id).map(|&i| self.vectors[i].as_slice())
    }

    /// Copy with every vector multiplied by `c`.
    pub fn scaled(&self, c: f64) -> FragmentVocabulary {
        let mut v = self.clone();
        for row in &mut v.vectors {
            row.iter_mut().for_each(|x| *x *= c);
        }
        v
    }

    /// Replaces one token's vector; used to build hand-made vocabularies.
    pub fn set_vector(&mut self, id: u64, values: Vec<f64>) -> Result<(), FeatureError> {
        if values.len() != self.dim {
            return Err(FeatureError::InvalidParameter(format!(
                "vector of length {} in a {}-dimensional vocabulary",
                values.len(),
                self.dim
            )));
        }
        let i = *self.index.get(&id).ok_or_else(|| FeatureError::InvalidParameter(format!("unknown token {id:016x}")))?;
        self.vectors[i] = values;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(FORMAT_TAG);
        s.push('\n');
        s.push_str(&format!("radius {}\n", self.radius));
        s.push_str(&format!("dim {}\n", self.dim));
        s.push_str(&format!("seed {}\n", self.seed));
        s.push_str(&format!("corpus_size {}\n", self.corpus_size));
        s.push_str(&format!("sa_anchor {}\n", self.sa.anchor));
        s.push_str(&format!("sa_lo {}\n", self.sa.lo));
        s.push_str(&format!("sa_hi {}\n", self.sa.hi));
        s.push_str(&format!("entries {}\n", self.ids.len()));
        for i in 0..self.ids.len() {
            s.push_str(&format!("{:016x} {}", self.ids[i], self.counts[i]));
            for x in &self.vectors[i] {
                s.push(' ');
                s.push_str(&x.to_string());
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| VocabError::Format { line: 0, reason: format!("missing {what}") })
        };
        let (line, tag) = next("format tag")?;
        if tag.trim() != FORMAT_TAG {
            return Err(VocabError::Format { line, reason: format!("unexpected format tag {tag:?}") });
        }
        fn field<T: std::str::FromStr>(line: usize, text: &str, key: &str) -> Result<T, VocabError> {
            let rest = text
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| VocabError::Format { line, reason: format!("expected {key}") })?;
            rest.trim().parse().map_err(|_| VocabError::Format { line, reason: format!("bad value for {key}") })
        }
        let (l, t) = next("radius")?;
        let radius: u32 = field(l, t, "radius")?;
        let (l, t) = next("dim")?;
        let dim: usize = field(l, t, "dim")?;
        let (l, t) = next("seed")?;
        let seed: u64 = field(l, t, "seed")?;
        let (l, t) = next("corpus_size")?;
        let corpus_size: usize = field(l, t, "corpus_size")?;
        let (l, t) = next("sa_anchor")?;
        let anchor: f64 = field(l, t, "sa_anchor")?;
        let (l, t) = next("sa_lo")?;
        let lo: f64 = field(l, t, "sa_lo")?;
        let (l, t) = next("sa_hi")?;
        let hi: f64 = field(l, t, "sa_hi")?;
        let (l, t) = next("entries")?;
        let entries: usize = field(l, t, "entries")?;
        let mut ids = Vec::with_capacity(entries);
        let mut counts = Vec::with_capacity(entries);
        let mut vectors = Vec::with_capacity(entries);
        for _ in 0..entries {
            let (line, t) = next("entry")?;
            let bad = |reason: &str| VocabError::Format { line, reason: reason.to_string() };
            let mut parts = t.split_ascii_whitespace();
            let id = u64::from_str_radix(parts.next().ok_or_else(|| bad("missing id"))?, 16).map_err(|_| bad("bad id"))?;
            let count: u64 = parts.next().ok_or_else(|| bad("missing count"))?.parse().map_err(|_| bad("bad count"))?;
            if count == 0 {
                return Err(bad("zero count"));
            }
            let v: Vec<f64> = parts.map(|p| p.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad("bad vector"))?;
            if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                return Err(bad("vector has wrong dimension or non-finite entries"));
            }
            ids.push(id);
            counts.push(count);
            vectors.push(v);
        }
        let index = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        Ok(FragmentVocabulary {
            radius,
            dim,
            seed,
            corpus_size,
            sa: SaCalibration { anchor, lo, hi },
            ids,
            counts,
            vectors,
            index,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        FragmentVocabulary::from_text(&fs::read_to_string(path)?)
    }
}

/// Count at which the most frequent fragments cover 80% of occurrences.
fn coverage_anchor(counts: &[u64]) -> f64 {
    let mut sorted: Vec<u64> = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let total: u64 = sorted.iter().sum();
    let mut acc = 0u64;
    for &c in &sorted {
        acc += c;
        if acc as f64 >= 0.8 * total as f64 {
            return c as f64;
        }
    }
    sorted.last().copied().unwrap_or(1) as f64
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Skip-gram with negative sampling. Each molecule's token sequence is one
/// sentence and the window spans the whole sentence; `contexts` partners are
/// drawn per centre token.
fn train_skipgram(sentences: &[Vec<usize>], counts: &[u64], p: &SkipGramParams) -> Vec<Vec<f64>> {
    let v = counts.len();
    let dim = p.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut input: Vec<Vec<f64>> =
        (0..v).map(|_| (0..dim).map(|_| (rng.gen::<f64>() - 0.5) / dim as f64).collect()).collect();
    let mut output = vec![vec![0.0; dim]; v];

    // unigram^0.75 cumulative table for negatives
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(v);
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cumulative.push(acc);
    }
    let draw_negative = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.gen();
        cumulative.partition_point(|&c| c < u).min(v - 1)
    };

    let steps_total: usize = p.epochs * sentences.iter().map(|s| if s.len() > 1 { s.len() } else { 0 }).sum::<usize>();
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut grad = vec![0.0; dim];
    for _ in 0..p.epochs {
        // Fisher-Yates with the training RNG
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for &si in &order {
            let sent = &sentences[si];
            if sent.len() < 2 {
                continue;
            }
            for (pos, &centre) in sent.iter().enumerate() {
                let lr = (p.learning_rate * (1.0 - step as f64 / steps_total.max(1) as f64)).max(p.learning_rate * 1e-4);
                step += 1;
                for _ in 0..p.contexts {
                    let mut other = rng.gen_range(0..sent.len() - 1);
                    if other >= pos {
                        other += 1;
                    }
                    let target = sent[other];
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=p.negatives {
                        let (word, label) = if k == 0 {
                            (target, 1.0)
                        } else {
                            let w = draw_negative(&mut rng);
                            if w == target {
                                continue;
                            }
                            (w, 0.0)
                        };
                        let dot: f64 = input[centre].iter().zip(&output[word]).map(|(a, b)| a * b).sum();
                        let g = lr * (label - sigmoid(dot));
                        for d in 0..dim {
                            grad[d] += g * output[word][d];
                            output[word][d] += g * input[centre][d];
                        }
                    }
                    for d in 0..dim {
                        input[centre][d] += grad[d];
                    }
                }
            }
        }
    }
    input
}

/// Builds a vocabulary with default skip-gram settings.
pub fn build_fragment_vocabulary(
    corpus: &[MolGraph],
    radius: u32,
    dim: usize,
    seed: u64,
) -> Result<FragmentVocabulary, VocabError> {
    build_fragment_vocabulary_with(corpus, &SkipGramParams { radius, dim, seed, ..SkipGramParams::default() })
}

pub fn build_fragment_vocabulary_with(corpus: &[MolGraph], p: &SkipGramParams) -> Result<FragmentVocabulary, VocabError> {
    if corpus.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }
    if p.dim == 0 {
        return Err(FeatureError::InvalidParameter("embedding dimension must be positive".into()).into());
    }
    let token_lists: Vec<Vec<u64>> = corpus.iter().map(|m| fragment_tokens(m, p.radius)).collect();
    let mut freq: BTreeMap<u64, u64> = BTreeMap::new();
    for toks in &token_lists {
        for &t in toks {
            *freq.entry(t).or_insert(0) += 1;
        }
    }
    let ids: Vec<u64> = freq.keys().copied().collect();
    let counts: Vec<u64> = freq.values().copied().collect();
    let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let sentences: Vec<Vec<usize>> = token_lists.iter().map(|t| t.iter().map(|id| index[id]).collect()).collect();
    let vectors = if ids.is_empty() { Vec::new() } else { train_skipgram(&sentences, &counts, p) };

    let anchor = coverage_anchor(&counts);
    let mut raws: Vec<f64> = corpus
        .iter()
        .zip(&token_lists)
        .filter(|(_, t)| !t.is_empty())
        .map(|(m, t)| raw_sa_components(m, t, |id| freq.get(&id).copied(), anchor).raw)
        .collect();
    raws.sort_by(f64::total_cmp);
    let (lo, hi) = if raws.is_empty() {
        (-4.0, 2.5)
    } else {
        let lo = percentile_linear(&raws, 1.0).min(-4.0);
        (lo, percentile_linear(&raws, 99.0).max(lo) + EASY_MARGIN)
    };

    Ok(FragmentVocabulary {
        radius: p.radius,
        dim: p.dim,
        seed: p.seed,
        corpus_size: corpus.len(),
        sa: SaCalibration { anchor, lo, hi },
        ids,
        counts,
        vectors,
        index,
    })
}

/// Mean of the token vectors of `mol`; tokens missing from the vocabulary
/// count as zero vectors.
pub fn mol2vec_embed(mol: &MolGraph, vocab: &FragmentVocabulary) -> Result<EmbeddingVector, FeatureError> {
    if vocab.is_empty() {
        return Err(FeatureError::EmptyVocabulary);
    }
    if !mol.is_single_fragment() {
        return Err(FeatureError::MultiFragmentInput);
    }
    let tokens = fragment_tokens(mol, vocab.radius);
    if tokens.is_empty() {
        return Err(FeatureError::NoTokens);
    }
    let mut sum = vec![0.0; vocab.dim];
    let mut known = 0usize;
    for t in &tokens {
        if let Some(v) = vocab.vector(*t) {
            known += 1;
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
    }
    if known == 0 {
        log::warn!("no fragment of the molecule is in the vocabulary; embedding is the zero vector");
    }
    let m = tokens.len() as f64;
    Ok(EmbeddingVector { values: sum.into_iter().map(|s| s / m).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn mols(smiles: &[&str]) -> Vec<MolGraph> {
        smiles.iter().map(|s| parse_smiles(s).unwrap()).collect()
    }

    #[test]
    fn single_molecule_corpus() {
        let corpus = mols(&["CCO"]);
        let v = build_fragment_vocabulary(&corpus, 2, 16, 1).unwrap();
        let mut expected = fragment_tokens(&corpus[0], 2);
        expected.sort_unstable();
        expected.dedup();
        assert_eq!(v.ids(), expected.as_slice());
        assert!(v.ids().iter().all(|&id| v.count(id).unwrap() >= 1));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let corpus = mols(&["CCO", "c1ccccc1O", "CC(=O)N"]);
        let v = build_fragment_vocabulary(&corpus, 2, 8, 3).unwrap();
        let text = v.to_text();
        let back = FragmentVocabulary::from_text(&text).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(build_fragment_vocabulary(&[], 2, 8, 0), Err(VocabError::EmptyCorpus)));
    }

    #[test]
    fn methane_is_one_token() {
        let corpus = mols(&["C", "CC"]);
        let v = build_fragment_vocabulary(&corpus, 2, 8, 0).unwrap();
        let e = mol2vec_embed(&corpus[0], &v).unwrap();
        let t = fragment_tokens(&corpus[0], 2);
        assert_eq!(t.len(), 1);
        assert_eq!(e.values.as_slice(), v.vector(t[0]).unwrap());
    }
}
