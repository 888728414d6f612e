use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{CampaignError, PercentileMethod};
use crate::data::TargetDataset;
use crate::features::FragmentVocabulary;
use crate::generation::{ExampleOrder, PromptExample};
use crate::molgraph::parse_smiles;
use crate::properties::property_profile;
use crate::stats::{percentile_linear, percentile_nearest_rank, sorted_copy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Experimental,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    /// Canonical SMILES.
    pub smiles: String,
    /// Measured activity, or the consensus mean for generated entries.
    pub activity: f64,
    pub origin: Origin,
    pub iteration_added: usize,
    /// Per-view predictions behind a generated entry's label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_view: Option<[f64; 3]>,
}

/// The growing example set: unique canonical SMILES in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<ContextEntry>", into = "Vec<ContextEntry>")]
pub struct Context {
    entries: Vec<ContextEntry>,
    index: HashSet<String>,
}

impl From<Vec<ContextEntry>> for Context {
    fn from(v: Vec<ContextEntry>) -> Self {
        let mut c = Context::default();
        for e in v {
            c.insert(e);
        }
        c
    }
}

impl From<Context> for Vec<ContextEntry> {
    fn from(c: Context) -> Self {
        c.entries
    }
}

impl Context {
    pub fn new() -> Self {
        Context::default()
    }

    /// Adds an entry unless its SMILES is already present.
    pub fn insert(&mut self, entry: ContextEntry) -> bool {
        if !self.index.insert(entry.smiles.clone()) {
            return false;
        }
        self.entries.push(entry);
        true
    }

    pub fn contains(&self, canonical: &str) -> bool {
        self.index.contains(canonical)
    }

    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn activities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.activity).collect()
    }

    pub fn median_activity(&self) -> Option<f64> {
        (!self.is_empty()).then(|| percentile_linear(&sorted_copy(&self.activities()), 50.0))
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.entries.iter().filter(|e| e.origin == origin).count()
    }

    /// Entries by activity in the requested direction, ties by SMILES.
    pub fn ordered(&self, order: ExampleOrder) -> Vec<&ContextEntry> {
        let mut v: Vec<&ContextEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| {
            let by = match order {
                ExampleOrder::Descending => b.activity.total_cmp(&a.activity),
                ExampleOrder::Ascending => a.activity.total_cmp(&b.activity),
            };
            by.then_with(|| a.smiles.cmp(&b.smiles))
        });
        v
    }

    /// Prompt examples in `order`, with property labels when a vocabulary is
    /// given (needed for the SA score).
    pub fn prompt_examples(&self, order: ExampleOrder, labels: Option<&FragmentVocabulary>) -> Vec<PromptExample> {
        self.ordered(order)
            .into_iter()
            .map(|e| {
                let mut ex = PromptExample::new(e.smiles.clone(), e.activity);
                if let Some(v) = labels {
                    ex.labels = parse_smiles(&e.smiles).ok().and_then(|m| property_profile(&m, v).ok());
                }
                ex
            })
            .collect()
    }
}

/// The `shots` most active records, most active first; equal activities are
/// ordered by canonical SMILES.
pub fn init_context(dataset: &TargetDataset, shots: usize) -> Result<Context, CampaignError> {
    if shots == 0 || dataset.len() < shots {
        return Err(CampaignError::InsufficientData { needed: shots.max(1), available: dataset.len() });
    }
    let mut recs: Vec<_> = dataset.records.iter().collect();
    recs.sort_by(|a, b| b.activity.total_cmp(&a.activity).then_with(|| a.smiles.cmp(&b.smiles)));
    let mut ctx = Context::new();
    for r in recs.into_iter().take(shots) {
        ctx.insert(ContextEntry {
            smiles: r.smiles.clone(),
            activity: r.activity,
            origin: Origin::Experimental,
            iteration_added: 0,
            per_view: None,
        });
    }
    Ok(ctx)
}

/// Cutoff `C_i` at percentile `p` of the context labels.
///
/// ```
/// use leadopt::campaign::{percentile_cutoff, Context, ContextEntry, Origin, PercentileMethod};
/// let ctx: Context = (1..=10)
///     .map(|i| ContextEntry { smiles: "C".repeat(i), activity: i as f64, origin: Origin::Experimental, iteration_added: 0, per_view: None })
///     .collect::<Vec<_>>()
///     .into();
/// assert!((percentile_cutoff(&ctx, 80.0, PercentileMethod::Linear) - 8.2).abs() < 1e-12);
/// ```
pub fn percentile_cutoff(context: &Context, p: f64, method: PercentileMethod) -> f64 {
    let s = sorted_copy(&context.activities());
    match method {
        PercentileMethod::Linear => percentile_linear(&s, p),
        PercentileMethod::NearestRank => percentile_nearest_rank(&s, p),
    }
}
