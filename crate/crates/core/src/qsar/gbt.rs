use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureView, QsarError};

const FORMAT: &str = "leadopt-gbt";
const FORMAT_VERSION: u32 = 1;
const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams { n_trees: 300, max_depth: 4, learning_rate: 0.1, min_leaf: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Regression tree stored as a node array; node 0 is the root. Serialized
/// as nested split/leaf records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Nested", from = "Nested")]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Nested {
    Split { feature: usize, threshold: f64, left: Box<Nested>, right: Box<Nested> },
    Leaf { value: f64 },
}

fn nest(nodes: &[Node], i: usize) -> Nested {
    match nodes[i] {
        Node::Leaf { value } => Nested::Leaf { value },
        Node::Split { feature, threshold, left, right } => Nested::Split {
            feature,
            threshold,
            left: Box::new(nest(nodes, left)),
            right: Box::new(nest(nodes, right)),
        },
    }
}

fn flatten(n: Nested, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    match n {
        Nested::Leaf { value } => nodes.push(Node::Leaf { value }),
        Nested::Split { feature, threshold, left, right } => {
            nodes.push(Node::Leaf { value: 0.0 });
            let left = flatten(*left, nodes);
            let right = flatten(*right, nodes);
            nodes[me] = Node::Split { feature, threshold, left, right };
        }
    }
    me
}

impl From<Tree> for Nested {
    fn from(t: Tree) -> Nested {
        nest(&t.nodes, 0)
    }
}

impl From<Nested> for Tree {
    fn from(n: Nested) -> Tree {
        let mut nodes = Vec::new();
        flatten(n, &mut nodes);
        Tree { nodes }
    }
}

impl Tree {
    pub fn output(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub format: String,
    pub version: u32,
    pub feature_view: Option<FeatureView>,
    pub params: GbtParams,
    pub n_features: usize,
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Training mean squared error after the base and after each tree.
    pub train_loss: Vec<f64>,
}

impl GbtModel {
    /// A model that always predicts `base`.
    pub fn constant(base: f64, n_features: usize, params: GbtParams) -> Self {
        GbtModel {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            feature_view: None,
            params,
            n_features,
            base_prediction: base,
            learning_rate: params.learning_rate,
            trees: Vec::new(),
            train_loss: Vec::new(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, QsarError> {
        if x.len() != self.n_features {
            return Err(QsarError::DimensionMismatch { expected: self.n_features, found: x.len() });
        }
        let sum: f64 = self.trees.iter().map(|t| t.output(x)).sum();
        Ok(self.base_prediction + self.learning_rate * sum)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, QsarError> {
        let m: GbtModel = serde_json::from_str(text).map_err(|e| QsarError::Format(e.to_string()))?;
        if m.format != FORMAT || m.version != FORMAT_VERSION {
            return Err(QsarError::Format(format!("unsupported model format {} v{}", m.format, m.version)));
        }
        for t in &m.trees {
            for n in &t.nodes {
                if let Node::Split { feature, left, right, .. } = *n {
                    if feature >= m.n_features || left >= t.nodes.len() || right >= t.nodes.len() {
                        return Err(QsarError::Format("split refers outside the model".into()));
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), QsarError> {
        fs::write(path, self.to_json()).map_err(|e| QsarError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, QsarError> {
        GbtModel::from_json(&fs::read_to_string(path).map_err(|e| QsarError::Io(e.to_string()))?)
    }
}

/// Features binned by their sorted distinct values. Bin 0 (the column
/// minimum) is implicit, so 0/1 fingerprint columns cost only their set bits.
struct Binned {
    /// Distinct values per feature, ascending.
    values: Vec<Vec<f64>>,
    offsets: Vec<usize>,
    /// Per sample: (feature, bin) for every bin other than 0.
    rows: Vec<Vec<(u32, u32)>>,
}

impl Binned {
    fn new(x: &[Vec<f64>], n_features: usize) -> Self {
        let mut values = Vec::with_capacity(n_features);
        for f in 0..n_features {
            let mut col: Vec<f64> = x.iter().map(|r| r[f]).collect();
            col.sort_by(f64::total_cmp);
            col.dedup();
            values.push(col);
        }
        let mut offsets = Vec::with_capacity(n_features + 1);
        let mut acc = 0;
        for v in &values {
            offsets.push(acc);
            acc += v.len();
        }
        offsets.push(acc);
        let rows = x
            .iter()
            .map(|r| {
                (0..n_features)
                    .filter_map(|f| {
                        let b = values[f].binary_search_by(|v| v.total_cmp(&r[f])).unwrap();
                        (b > 0).then_some((f as u32, b as u32))
                    })
                    .collect()
            })
            .collect();
        Binned { values, offsets, rows }
    }

    fn total_bins(&self) -> usize {
        *self.offsets.last().unwrap()
    }
}

struct SplitChoice {
    feature: usize,
    bin: usize,
    gain: f64,
}

fn best_split(binned: &Binned, idx: &[usize], residual: &[f64], min_leaf: usize, sums: &mut [f64], counts: &mut [u32]) -> Option<SplitChoice> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| residual[i]).sum();
    sums.iter_mut().for_each(|s| *s = 0.0);
    counts.iter_mut().for_each(|c| *c = 0);
    for &i in idx {
        for &(f, b) in &binned.rows[i] {
            let k = binned.offsets[f as usize] + b as usize;
            sums[k] += residual[i];
            counts[k] += 1;
        }
    }
    let parent = total * total / n as f64;
    let mut best: Option<SplitChoice> = None;
    for f in 0..binned.values.len() {
        let nb = binned.values[f].len();
        if nb < 2 {
            continue;
        }
        let off = binned.offsets[f];
        // bin 0 holds whatever the explicit bins do not
        let explicit_sum: f64 = sums[off + 1..off + nb].iter().sum();
        let explicit_cnt: u32 = counts[off + 1..off + nb].iter().sum();
        let mut left_sum = total - explicit_sum;
        let mut left_cnt = n as u32 - explicit_cnt;
        for b in 0..nb - 1 {
            if b > 0 {
                left_sum += sums[off + b];
                left_cnt += counts[off + b];
            }
            let right_cnt = n as u32 - left_cnt;
            if (left_cnt as usize) < min_leaf || (right_cnt as usize) < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / left_cnt as f64 + right_sum * right_sum / right_cnt as f64 - parent;
            if gain > 1e-12 && best.as_ref().is_none_or(|s| gain > s.gain) {
                best = Some(SplitChoice { feature: f, bin: b, gain });
            }
        }
    }
    best
}

fn grow(
    binned: &Binned,
    idx: Vec<usize>,
    residual: &[f64],
    params: &GbtParams,
    depth: usize,
    nodes: &mut Vec<Node>,
    scratch: &mut (Vec<f64>, Vec<u32>),
) -> usize {
    let me = nodes.len();
    let mean = idx.iter().map(|&i| residual[i]).sum::<f64>() / idx.len() as f64;
    nodes.push(Node::Leaf { value: mean });
    if depth >= params.max_depth || idx.len() < 2 * params.min_leaf.max(1) {
        return me;
    }
    let Some(choice) = best_split(binned, &idx, residual, params.min_leaf.max(1), &mut scratch.0, &mut scratch.1) else {
        return me;
    };
    let threshold = binned.values[choice.feature][choice.bin];
    let off_bin = |i: usize| {
        binned.rows[i]
            .iter()
            .find(|&&(f, _)| f as usize == choice.feature)
            .map_or(0, |&(_, b)| b as usize)
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| off_bin(i) <= choice.bin);
    let left = grow(binned, l, residual, params, depth + 1, nodes, scratch);
    let right = grow(binned, r, residual, params, depth + 1, nodes, scratch);
    nodes[me] = Node::Split { feature: choice.feature, threshold, left, right };
    me
}

fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Least-squares gradient boosting: each tree fits the residuals of the
/// running prediction and leaves hold mean residuals. Deterministic; splits
/// are exact over distinct feature values, ties going to the lower feature
/// index and then the lower threshold.
pub fn train_gbt(x: &[Vec<f64>], y: &[f64], params: &GbtParams) -> Result<GbtModel, QsarError> {
    if x.len() != y.len() {
        return Err(QsarError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < MIN_SAMPLES {
        return Err(QsarError::InsufficientData { needed: MIN_SAMPLES, available: x.len() });
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(QsarError::InvalidInput("feature vectors differ in length".into()));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(QsarError::InvalidInput("non-finite feature or label".into()));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(QsarError::InvalidInput("learning rate must lie in (0, 1]".into()));
    }
    let base = y.iter().sum::<f64>() / y.len() as f64;
    let mut model = GbtModel::constant(base, d, *params);
    let mut pred = vec![base; y.len()];
    model.train_loss.push(mse(y, &pred));

    let binned = Binned::new(x, d);
    let labels_vary = y.iter().any(|&v| v != y[0]);
    if binned.values.iter().all(|v| v.len() < 2) {
        if labels_vary {
            log::warn!("every feature is constant; returning a base-prediction model");
        }
        return Ok(model);
    }
    let mut scratch = (vec![0.0; binned.total_bins()], vec![0u32; binned.total_bins()]);
    let all: Vec<usize> = (0..y.len()).collect();
    for _ in 0..params.n_trees {
        let residual: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let mut nodes = Vec::new();
        grow(&binned, all.clone(), &residual, params, 0, &mut nodes, &mut scratch);
        let tree = Tree { nodes };
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.output(&x[i]);
        }
        model.trees.push(tree);
        model.train_loss.push(mse(y, &pred));
    }
    Ok(model)
}
