use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    filter_and_label, frechet_distance_features, init_context, internal_diversity, percentile_cutoff, CampaignConfig,
    CampaignError, Context, ContextEntry, CutoffBasis, FilterOptions, FrechetSpace, LeadSelection, Origin,
};
use crate::data::{load_dataset_with, prepare_pools_with, write_dataset, PoolConfig, TargetDataset};
use crate::features::{build_fragment_vocabulary_with, circular_fingerprint, SkipGramParams, DEFAULT_FP_BITS, DEFAULT_FP_RADIUS};
use crate::generation::{
    build_generation_prompt, generate_batch, request_fingerprint, AuditLog, GeneratedBatch, Generator, PromptSpec,
};
use crate::molgraph::{parse_smiles, MolGraph};
use crate::qsar::{train_ensemble, EnsemblePredictor, GbtParams};
use crate::stats::FiveNumber;

pub const STATE_FILE: &str = "state.json";
pub const STATE_SCHEMA: &str = "leadopt-campaign-state";
pub const STATE_VERSION: u32 = 1;
const DATASET_FILE: &str = "dataset.csv";
const MODEL_DIR: &str = "model";
const AUDIT_FILE: &str = "audit.jsonl";
const FALLBACK_LEADS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRate {
    pub condition: String,
    pub evaluated: usize,
    pub passed: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    /// 1-based.
    pub iteration: usize,
    pub lead: String,
    pub prompt_examples: usize,
    pub prompt_truncated: usize,
    pub request_fingerprint: String,
    /// Set when the backend failed after all retries; the iteration then
    /// continues with an empty batch.
    pub backend_error: Option<String>,
    pub generated: usize,
    pub valid: usize,
    pub unique: usize,
    /// Unique candidates not already in the context.
    pub novel: usize,
    pub accepted: usize,
    pub cutoff: f64,
    /// Context size after the iteration.
    pub context_size: usize,
    /// Median context label after the iteration.
    pub median_activity: f64,
    /// Consensus predictions of the scored candidates.
    pub predicted: Option<FiveNumber>,
    pub condition_pass_rates: Vec<ConditionRate>,
    /// Squared Fréchet distance of the unique valid candidates to the lead pool.
    pub frechet_to_leads: Option<f64>,
    pub internal_diversity: f64,
    pub rejections: BTreeMap<String, usize>,
    pub accepted_smiles: Vec<String>,
}

/// Everything needed to continue a campaign, written after every iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub schema: String,
    pub version: u32,
    pub target_name: String,
    pub config: CampaignConfig,
    pub leads: Vec<String>,
    pub initial_cutoff: f64,
    pub context: Context,
    pub reports: Vec<IterationReport>,
    pub zero_streak: usize,
    /// `max_iterations` or `no_acceptance` once finished.
    pub stop_reason: Option<String>,
}

impl CampaignState {
    pub fn is_finished(&self) -> bool {
        self.stop_reason.is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CampaignError> {
        let s: CampaignState = serde_json::from_str(text).map_err(|e| CampaignError::State(e.to_string()))?;
        if s.schema != STATE_SCHEMA || s.version != STATE_VERSION {
            return Err(CampaignError::State(format!("unsupported state {} v{}", s.schema, s.version)));
        }
        Ok(s)
    }

    /// Writes `state.json` through a temporary file so readers never see a
    /// partial state.
    pub fn save(&self, dir: &Path) -> Result<(), CampaignError> {
        let io = |e: std::io::Error| CampaignError::Io(e.to_string());
        fs::create_dir_all(dir).map_err(io)?;
        let tmp = dir.join(format!("{STATE_FILE}.tmp"));
        fs::write(&tmp, self.to_json()).map_err(io)?;
        fs::rename(&tmp, dir.join(STATE_FILE)).map_err(io)
    }

    pub fn load(dir: &Path) -> Result<Self, CampaignError> {
        let path = dir.join(STATE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CampaignError::Io(format!("{}: {e}", path.display())))?;
        CampaignState::from_json(&text)
    }
}

/// One row per iteration.
pub fn reports_to_tsv(reports: &[IterationReport]) -> String {
    let mut s = String::from(
        "iteration\tlead\tgenerated\tvalid\tunique\tnovel\taccepted\tcutoff\tcontext_size\tmedian_activity\t\
         pred_min\tpred_q1\tpred_median\tpred_q3\tpred_max\tfrechet_to_leads\tinternal_diversity\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in reports {
        let p = r.predicted;
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.iteration,
            r.lead,
            r.generated,
            r.valid,
            r.unique,
            r.novel,
            r.accepted,
            r.cutoff,
            r.context_size,
            r.median_activity,
            opt(p.map(|p| p.min)),
            opt(p.map(|p| p.q1)),
            opt(p.map(|p| p.median)),
            opt(p.map(|p| p.q3)),
            opt(p.map(|p| p.max)),
            opt(r.frechet_to_leads),
            r.internal_diversity
        );
    }
    s
}

/// Frozen pieces of a campaign: the evaluators, the backend and the lead pool.
#[derive(Debug)]
pub struct CampaignRunner {
    config: CampaignConfig,
    ensemble: EnsemblePredictor,
    generator: Generator,
    leads: Vec<String>,
    lead_space: Option<(FrechetSpace, Vec<Vec<f64>>)>,
}

fn molecules(ds: &TargetDataset) -> Vec<MolGraph> {
    ds.records.iter().map(|r| parse_smiles(&r.smiles).expect("dataset records hold valid SMILES")).collect()
}

/// Pool50 when the dataset supports pools, otherwise the most active records.
pub(crate) fn lead_pool(ds: &TargetDataset, threshold: f64) -> Vec<String> {
    let pool50 = match &ds.pools {
        Some(p) => Some(p.pool50.clone()),
        None => prepare_pools_with(ds, &PoolConfig { threshold, ..PoolConfig::default() })
            .ok()
            .and_then(|d| d.pools.map(|p| p.pool50)),
    };
    if let Some(p) = pool50 {
        return p.iter().map(|&i| ds.records[i].smiles.clone()).collect();
    }
    log::warn!("dataset too small for pools; using the {FALLBACK_LEADS} most active records as leads");
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.sort_by(|&a, &b| {
        ds.records[b].activity.total_cmp(&ds.records[a].activity).then_with(|| ds.records[a].smiles.cmp(&ds.records[b].smiles))
    });
    idx.into_iter().take(FALLBACK_LEADS).map(|i| ds.records[i].smiles.clone()).collect()
}

impl CampaignRunner {
    /// Trains the three evaluators once on the experimental records.
    pub fn train(dataset: &TargetDataset, config: &CampaignConfig) -> Result<EnsemblePredictor, CampaignError> {
        let mols = molecules(dataset);
        let vocab = build_fragment_vocabulary_with(&mols, &SkipGramParams { seed: config.seed, ..config.embedding })?;
        let gbt = GbtParams { seed: config.seed, ..config.gbt };
        Ok(train_ensemble(&mols, &dataset.activities(), Arc::new(vocab), &gbt)?)
    }

    pub fn new(
        config: CampaignConfig,
        ensemble: EnsemblePredictor,
        leads: Vec<String>,
        audit: Option<AuditLog>,
    ) -> Result<Self, CampaignError> {
        config.validate()?;
        let mut generator = Generator::new(&config.backend)?;
        if let Some(a) = audit {
            generator = generator.with_audit(a);
        }
        let lead_mols: Vec<MolGraph> = leads.iter().filter_map(|s| parse_smiles(s).ok()).collect();
        let lead_space = if lead_mols.len() >= 2 {
            let space = FrechetSpace::fit(&lead_mols)?;
            let feats = lead_mols.iter().map(|m| space.features(m, ensemble.vocab())).collect::<Result<Vec<_>, _>>();
            feats.ok().map(|f| (space, f))
        } else {
            None
        };
        Ok(CampaignRunner { config, ensemble, generator, leads, lead_space })
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn ensemble(&self) -> &EnsemblePredictor {
        &self.ensemble
    }

    pub fn leads(&self) -> &[String] {
        &self.leads
    }

    fn lead_for(&self, ctx: &Context, iteration: usize) -> Result<String, CampaignError> {
        Ok(match &self.config.lead_selection {
            LeadSelection::Fixed { smiles } => smiles.clone(),
            LeadSelection::BestInContext => ctx.ordered(crate::generation::ExampleOrder::Descending)[0].smiles.clone(),
            LeadSelection::RotatePool => {
                if self.leads.is_empty() {
                    return Err(CampaignError::InvalidConfig("lead pool is empty".into()));
                }
                self.leads[(iteration - 1) % self.leads.len()].clone()
            }
        })
    }

    /// One round: cutoff, prompt, generation, consensus filter, context update.
    pub fn run_iteration(
        &self,
        ctx: &Context,
        iteration: usize,
        initial_cutoff: f64,
    ) -> Result<(Context, IterationReport), CampaignError> {
        if ctx.is_empty() {
            return Err(CampaignError::InvalidInput("context is empty".into()));
        }
        let cfg = &self.config;
        let cutoff = match cfg.cutoff_basis {
            CutoffBasis::Context => percentile_cutoff(ctx, cfg.cutoff_percentile, cfg.percentile_method),
            CutoffBasis::Initial => initial_cutoff,
        };
        let lead = self.lead_for(ctx, iteration)?;
        let labels = cfg.include_extra_labels.then(|| self.ensemble.vocab().as_ref());
        let mut spec = PromptSpec::new(ctx.prompt_examples(cfg.example_order, labels), lead.clone(), cfg.batch_size);
        spec.conditions = cfg.conditions.clone();
        spec.char_budget = cfg.char_budget;
        let prompt = build_generation_prompt(&spec, cfg.include_extra_labels)?;
        let fingerprint = request_fingerprint(&prompt.text);

        let (batch, backend_error) = match generate_batch(&self.generator, &prompt.text) {
            Ok(b) => (b, None),
            Err(e) => {
                log::warn!("iteration {iteration}: generation failed: {e}");
                (GeneratedBatch::empty(fingerprint.clone()), Some(e.to_string()))
            }
        };
        let opts = FilterOptions { conditions: cfg.conditions.clone(), strict: cfg.strict_conditions };
        let outcome = filter_and_label(&batch, &self.ensemble, cutoff, ctx, &opts);

        let mut next = ctx.clone();
        for a in &outcome.accepted {
            next.insert(ContextEntry {
                smiles: a.smiles.clone(),
                activity: a.label,
                origin: Origin::Generated,
                iteration_added: iteration,
                per_view: Some(a.per_view),
            });
        }

        let valid: Vec<&str> = batch.molecules.iter().filter_map(|m| m.canonical.as_deref()).collect();
        let distinct: Vec<&str> = {
            let mut seen = HashSet::new();
            valid.iter().copied().filter(|c| seen.insert(*c)).collect()
        };
        let novel = distinct.iter().filter(|c| !ctx.contains(c)).count();
        let mut rejections = BTreeMap::new();
        for d in &outcome.decisions {
            if let Some(r) = d.rejected {
                *rejections.entry(r.code().to_string()).or_insert(0) += 1;
            }
        }
        let scored: Vec<_> = outcome.decisions.iter().filter(|d| d.consensus.is_some()).collect();
        let predicted = FiveNumber::of(&scored.iter().map(|d| d.consensus.unwrap().mean).collect::<Vec<_>>());
        let condition_pass_rates = cfg
            .conditions
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let passed = scored.iter().filter(|d| d.conditions.as_ref().is_some_and(|r| r.outcomes[k].passed)).count();
                ConditionRate {
                    condition: c.to_string(),
                    evaluated: scored.len(),
                    passed,
                    rate: if scored.is_empty() { 0.0 } else { passed as f64 / scored.len() as f64 },
                }
            })
            .collect();
        let distinct_mols: Vec<MolGraph> = distinct.iter().filter_map(|s| parse_smiles(s).ok()).collect();
        let frechet_to_leads = match &self.lead_space {
            Some((space, lead_feats)) if distinct_mols.len() >= 2 => distinct_mols
                .iter()
                .map(|m| space.features(m, self.ensemble.vocab()))
                .collect::<Result<Vec<_>, _>>()
                .ok()
                .and_then(|f| frechet_distance_features(&f, lead_feats).ok()),
            _ => None,
        };
        let fps: Vec<_> = valid
            .iter()
            .filter_map(|s| parse_smiles(s).ok())
            .filter_map(|m| circular_fingerprint(&m, DEFAULT_FP_RADIUS, DEFAULT_FP_BITS).ok())
            .collect();

        let report = IterationReport {
            iteration,
            lead,
            prompt_examples: prompt.examples_included,
            prompt_truncated: prompt.examples_truncated,
            request_fingerprint: fingerprint,
            backend_error,
            generated: batch.molecules.len(),
            valid: valid.len(),
            unique: distinct.len(),
            novel,
            accepted: outcome.accepted.len(),
            cutoff,
            context_size: next.len(),
            median_activity: next.median_activity().expect("context is non-empty"),
            predicted,
            condition_pass_rates,
            frechet_to_leads,
            internal_diversity: internal_diversity(&fps),
            rejections,
            accepted_smiles: outcome.accepted.iter().map(|a| a.smiles.clone()).collect(),
        };
        log::info!(
            "iteration {iteration}: {} generated, {} accepted above {:.3}, context {}",
            report.generated,
            report.accepted,
            cutoff,
            report.context_size
        );
        Ok((next, report))
    }
}

/// A campaign in progress, optionally persisted to a directory holding the
/// state, the dataset, the trained evaluators and the audit log.
#[derive(Debug)]
pub struct CampaignSession {
    runner: CampaignRunner,
    state: CampaignState,
    dir: Option<PathBuf>,
}

impl CampaignSession {
    pub fn start(dataset: &TargetDataset, config: CampaignConfig, dir: Option<&Path>) -> Result<Self, CampaignError> {
        config.validate()?;
        let context = init_context(dataset, config.initial_shots)?;
        let initial_cutoff = percentile_cutoff(&context, config.cutoff_percentile, config.percentile_method);
        let ensemble = CampaignRunner::train(dataset, &config)?;
        let leads = lead_pool(dataset, config.butina_threshold);
        let audit = dir.map(|d| AuditLog::new(d.join(AUDIT_FILE)));
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| CampaignError::Io(e.to_string()))?;
            write_dataset(dataset, &d.join(DATASET_FILE))?;
            ensemble.save(&d.join(MODEL_DIR))?;
        }
        let stop_reason = (config.max_iterations == 0).then(|| "max_iterations".to_string());
        let state = CampaignState {
            schema: STATE_SCHEMA.into(),
            version: STATE_VERSION,
            target_name: dataset.target_name.clone(),
            config: config.clone(),
            leads: leads.clone(),
            initial_cutoff,
            context,
            reports: Vec::new(),
            zero_streak: 0,
            stop_reason,
        };
        let runner = CampaignRunner::new(config, ensemble, leads, audit)?;
        let session = CampaignSession { runner, state, dir: dir.map(Path::to_path_buf) };
        session.persist()?;
        Ok(session)
    }

    /// Continues from the last persisted iteration in `dir`.
    pub fn resume(dir: &Path) -> Result<Self, CampaignError> {
        let state = CampaignState::load(dir)?;
        let ensemble = EnsemblePredictor::load(&dir.join(MODEL_DIR))?;
        let runner = CampaignRunner::new(
            state.config.clone(),
            ensemble,
            state.leads.clone(),
            Some(AuditLog::new(dir.join(AUDIT_FILE))),
        )?;
        Ok(CampaignSession { runner, state, dir: Some(dir.to_path_buf()) })
    }

    /// The dataset stored with a persisted campaign.
    pub fn stored_dataset(dir: &Path, target_name: &str) -> Result<TargetDataset, CampaignError> {
        Ok(load_dataset_with(&dir.join(DATASET_FILE), target_name, f64::NEG_INFINITY)?.0)
    }

    pub fn state(&self) -> &CampaignState {
        &self.state
    }

    pub fn runner(&self) -> &CampaignRunner {
        &self.runner
    }

    pub fn is_finished(&self) -> bool {
        self.state.is_finished()
    }

    fn persist(&self) -> Result<(), CampaignError> {
        match &self.dir {
            Some(d) => self.state.save(d),
            None => Ok(()),
        }
    }

    /// Runs one iteration and persists. Returns `false` once finished.
    pub fn step(&mut self) -> Result<bool, CampaignError> {
        if self.is_finished() {
            return Ok(false);
        }
        let it = self.state.reports.len() + 1;
        let (ctx, report) = self.runner.run_iteration(&self.state.context, it, self.state.initial_cutoff)?;
        self.state.zero_streak = if report.accepted == 0 { self.state.zero_streak + 1 } else { 0 };
        self.state.context = ctx;
        self.state.reports.push(report);
        let cfg = &self.state.config;
        if self.state.zero_streak >= cfg.early_stop_after {
            self.state.stop_reason = Some("no_acceptance".into());
        } else if self.state.reports.len() >= cfg.max_iterations {
            self.state.stop_reason = Some("max_iterations".into());
        }
        self.persist()?;
        Ok(true)
    }

    pub fn run(mut self) -> Result<CampaignState, CampaignError> {
        while self.step()? {}
        Ok(self.state)
    }
}

/// Trains the evaluators and runs the whole campaign in memory.
pub fn run_campaign(dataset: &TargetDataset, config: CampaignConfig) -> Result<CampaignState, CampaignError> {
    CampaignSession::start(dataset, config, None)?.run()
}
