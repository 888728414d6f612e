//! The iterative loop: a context of labeled examples feeds a generation
//! prompt, generated molecules that all three activity models rate above the
//! context's cutoff percentile join the context, and the next round starts
//! from the enlarged context.

mod context;
mod filter;
mod frechet;
mod metrics;
mod runner;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, DEFAULT_BUTINA_THRESHOLD};
use crate::features::{FeatureError, SkipGramParams, VocabError};
use crate::generation::{ExampleOrder, GenerationError, GeneratorBackendConfig};
use crate::properties::ConditionSpec;
use crate::qsar::{GbtParams, QsarError};

pub use context::{init_context, percentile_cutoff, Context, ContextEntry, Origin};
pub use filter::{
    consensus_accepts, filter_and_label, AcceptedCandidate, CandidateDecision, FilterOptions, FilterOutcome,
    RejectReason,
};
pub use frechet::{frechet_distance, frechet_distance_features, FrechetSpace, FRECHET_EPSILON};
pub use metrics::{eval_batch, internal_diversity, EvalMetrics};
pub use runner::{
    reports_to_tsv, run_campaign, CampaignRunner, CampaignSession, CampaignState, ConditionRate, IterationReport,
    STATE_FILE, STATE_SCHEMA, STATE_VERSION,
};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("need at least {needed} records, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("need at least {needed} molecules, have {available}")]
    TooFewSamples { needed: usize, available: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("campaign state: {0}")]
    State(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Qsar(#[from] QsarError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PercentileMethod {
    #[default]
    Linear,
    NearestRank,
}

/// Which labels the cutoff percentile is taken over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffBasis {
    /// The current context, recomputed every iteration.
    #[default]
    Context,
    /// The initial experimental context only.
    Initial,
}

/// Lead molecule handed to each generation request.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeadSelection {
    /// Cycle through the lead pool in order.
    #[default]
    RotatePool,
    /// The most active context entry at the start of the iteration.
    BestInContext,
    Fixed { smiles: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub initial_shots: usize,
    pub max_iterations: usize,
    pub batch_size: usize,
    pub cutoff_percentile: f64,
    pub percentile_method: PercentileMethod,
    pub cutoff_basis: CutoffBasis,
    pub conditions: Vec<ConditionSpec>,
    /// Gate acceptance on the property conditions as well as activity.
    pub strict_conditions: bool,
    pub backend: GeneratorBackendConfig,
    /// Seeds the vocabulary and the boosted trees.
    pub seed: u64,
    pub include_extra_labels: bool,
    pub example_order: ExampleOrder,
    pub char_budget: Option<usize>,
    pub lead_selection: LeadSelection,
    /// Stop after this many consecutive iterations without acceptance.
    pub early_stop_after: usize,
    pub gbt: GbtParams,
    pub embedding: SkipGramParams,
    pub butina_threshold: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            initial_shots: 500,
            max_iterations: 10,
            batch_size: 40,
            cutoff_percentile: 80.0,
            percentile_method: PercentileMethod::Linear,
            cutoff_basis: CutoffBasis::Context,
            conditions: Vec::new(),
            strict_conditions: false,
            backend: GeneratorBackendConfig::mock(0),
            seed: 0,
            include_extra_labels: false,
            example_order: ExampleOrder::Descending,
            char_budget: None,
            lead_selection: LeadSelection::RotatePool,
            early_stop_after: 3,
            gbt: GbtParams::default(),
            embedding: SkipGramParams::default(),
            butina_threshold: DEFAULT_BUTINA_THRESHOLD,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: &str| Err(CampaignError::InvalidConfig(m.to_string()));
        if !(self.cutoff_percentile > 0.0 && self.cutoff_percentile < 100.0) {
            return bad("cutoff_percentile must lie strictly between 0 and 100");
        }
        if self.initial_shots == 0 {
            return bad("initial_shots must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.early_stop_after == 0 {
            return bad("early_stop_after must be at least 1");
        }
        if let LeadSelection::Fixed { smiles } = &self.lead_selection {
            crate::molgraph::parse_smiles(smiles)
                .map_err(|e| CampaignError::InvalidConfig(format!("fixed lead does not parse: {e}")))?;
        }
        for c in &self.conditions {
            c.validate().map_err(|e| CampaignError::InvalidConfig(e.to_string()))?;
        }
        self.backend.validate()?;
        Ok(())
    }
}
