//! Operations shared by the HTTP API and the command line.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::thread;
use std::time::Duration;

use chrono::Utc;
use leadopt::campaign::{reports_to_tsv, CampaignConfig, CampaignSession, CampaignState, IterationReport, STATE_FILE};
use leadopt::data::{
    load_dataset_with, prepare_pools_with, synthetic_library, ActivityRecord, PoolConfig, TargetDataset,
    DEFAULT_BUTINA_THRESHOLD, DEFAULT_MIN_ACTIVITY,
};
use leadopt::features::{build_fragment_vocabulary_with, FragmentVocabulary, SkipGramParams};
use leadopt::generation::{modify_molecule, Generator, ModificationResult, PropertyExample};
use leadopt::molgraph::{parse_smiles, to_canonical};
use leadopt::properties::{property_profile, Property, PropertyProfile};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::depict::{depict, Depiction};
use crate::error::{Result, ServiceError};
use crate::store::{
    check_id, CampaignHandle, CampaignStatus, DatasetSummary, SessionEntry, SessionEvent, SessionRecord, Store,
};

const VOCAB_FILE: &str = "modify-vocab.txt";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetUpload {
    pub name: String,
    /// `smiles,activity[,...]` text with a header row.
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default)]
    pub records: Option<Vec<ActivityRecord>>,
    #[serde(default)]
    pub min_activity: Option<f64>,
    /// Build the best20/pool50 split. Defaults to on when there are enough
    /// records.
    #[serde(default)]
    pub pools: Option<bool>,
    #[serde(default)]
    pub butina_threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartRequest {
    #[serde(default)]
    pub id: Option<String>,
    pub dataset: String,
    #[serde(default)]
    pub config: Option<CampaignConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignView {
    pub handle: CampaignHandle,
    pub reports: Vec<IterationReport>,
    pub context_size: Option<usize>,
}

/// Per-iteration series for plotting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportSeries {
    pub iteration: Vec<usize>,
    pub cutoff: Vec<f64>,
    pub median_activity: Vec<f64>,
    pub context_size: Vec<usize>,
    pub generated: Vec<usize>,
    pub valid: Vec<usize>,
    pub accepted: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignReport {
    pub id: String,
    pub status: CampaignStatus,
    pub stop_reason: Option<String>,
    pub initial_cutoff: Option<f64>,
    pub series: ReportSeries,
    pub tsv: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModifyRequest {
    pub molecule: String,
    pub instruction: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModifyResponse {
    pub result: ModificationResult,
    pub before: Depiction,
    pub after: Option<Depiction>,
    pub session: SessionRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub index: usize,
    pub smiles: String,
    pub properties: PropertyProfile,
}

/// Knobs for a campaign worker.
#[derive(Debug, Clone, Copy, Default)]
pub struct DriveOptions {
    /// Sleep between iterations; lets tests interrupt a run at a known point.
    pub throttle: Option<Duration>,
}

pub struct Service {
    store: Store,
    config: ServiceConfig,
    generator: Generator,
    vocab: OnceLock<Arc<FragmentVocabulary>>,
    workers: Mutex<HashMap<String, Arc<AtomicBool>>>,
    session_lock: Mutex<()>,
}

impl Service {
    /// Opens the data directory. Campaigns left `running` by a previous
    /// process are marked `paused`; their last persisted iteration stands.
    pub fn open(data_dir: impl Into<PathBuf>, config: ServiceConfig) -> Result<Self> {
        let store = Store::open(data_dir)?;
        let generator = Generator::new(&config.modify.backend)?;
        for mut h in store.list_campaigns()? {
            if h.status == CampaignStatus::Running {
                h.transition(CampaignStatus::Paused)?;
                h.error = Some("interrupted; resume to continue".into());
                store.save_handle(&h)?;
            }
        }
        Ok(Service {
            store,
            config,
            generator,
            vocab: OnceLock::new(),
            workers: Mutex::new(HashMap::new()),
            session_lock: Mutex::new(()),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Fragment vocabulary for SA scores in modification results, read from
    /// the data directory or built once from a synthetic corpus.
    pub fn vocab(&self) -> Result<Arc<FragmentVocabulary>> {
        if let Some(v) = self.vocab.get() {
            return Ok(v.clone());
        }
        let path = self.store.root().join(VOCAB_FILE);
        let v = match fs::read_to_string(&path) {
            Ok(text) => FragmentVocabulary::from_text(&text).map_err(|e| ServiceError::Internal(e.to_string()))?,
            Err(_) => {
                let corpus: Vec<_> = synthetic_library(self.config.modify.vocab_corpus.max(1), 0)
                    .iter()
                    .filter_map(|s| parse_smiles(s).ok())
                    .collect();
                let params = SkipGramParams { seed: self.config.campaign.seed, ..Default::default() };
                let v = build_fragment_vocabulary_with(&corpus, &params)
                    .map_err(|e| ServiceError::Internal(e.to_string()))?;
                let tmp = path.with_extension("tmp");
                fs::write(&tmp, v.to_text())?;
                fs::rename(&tmp, &path)?;
                v
            }
        };
        Ok(self.vocab.get_or_init(|| Arc::new(v)).clone())
    }

    pub fn register_dataset(&self, up: &DatasetUpload) -> Result<DatasetSummary> {
        check_id("dataset", &up.name)?;
        let min = up.min_activity.unwrap_or(DEFAULT_MIN_ACTIVITY);
        let (ds, errors) = match (&up.csv, &up.records) {
            (Some(text), None) => {
                let tmp = self.store.root().join("datasets").join(format!("{}.upload.csv", up.name));
                fs::write(&tmp, text)?;
                let loaded = load_dataset_with(&tmp, &up.name, min);
                let _ = fs::remove_file(&tmp);
                loaded?
            }
            (None, Some(records)) => TargetDataset::from_records(&up.name, records.clone(), min),
            _ => return Err(ServiceError::Validation("give exactly one of `csv` or `records`".into())),
        };
        if ds.is_empty() {
            return Err(ServiceError::Validation("dataset has no usable records".into()));
        }
        let cfg = PoolConfig { threshold: up.butina_threshold.unwrap_or(DEFAULT_BUTINA_THRESHOLD), ..Default::default() };
        let want_pools = up.pools.unwrap_or(ds.len() >= cfg.best_size + cfg.lead_pool_size);
        let ds = if want_pools { prepare_pools_with(&ds, &cfg)? } else { ds };
        self.store.save_dataset(&ds, &errors)?;
        Ok(DatasetSummary { name: up.name.clone(), records: ds.len(), has_pools: ds.pools.is_some(), row_errors: errors.len() })
    }

    pub fn list_datasets(&self) -> Result<Vec<DatasetSummary>> {
        self.store.list_datasets()
    }

    /// Persists a handle in `created` state after checking the dataset and
    /// the configuration.
    fn create_campaign(&self, req: &StartRequest) -> Result<(CampaignHandle, TargetDataset)> {
        let config = req.config.clone().unwrap_or_else(|| self.config.campaign.clone());
        config.validate()?;
        let id = match &req.id {
            Some(id) => id.clone(),
            None => uuid::Uuid::new_v4().to_string(),
        };
        check_id("campaign", &id)?;
        let dataset = self.store.dataset(&req.dataset)?;
        if self.store.has_campaign(&id) {
            return Err(ServiceError::Conflict(format!("campaign '{id}' already exists")));
        }
        let handle = CampaignHandle::new(&id, &req.dataset, config);
        self.store.create_handle(&handle)?;
        Ok((handle, dataset))
    }

    /// Starts a campaign on a worker thread and returns its handle at once.
    pub fn start_campaign(self: &Arc<Self>, req: &StartRequest) -> Result<CampaignHandle> {
        let (handle, dataset) = self.create_campaign(req)?;
        self.spawn_worker(handle.clone(), Some(dataset));
        Ok(handle)
    }

    /// Runs a campaign to completion on the calling thread.
    pub fn run_campaign_blocking(&self, req: &StartRequest, opts: DriveOptions) -> Result<CampaignHandle> {
        let (handle, dataset) = self.create_campaign(req)?;
        let stop = Arc::new(AtomicBool::new(false));
        self.drive(handle, Some(dataset), &stop, opts)
    }

    /// Continues a paused campaign on the calling thread.
    pub fn resume_campaign_blocking(&self, id: &str, opts: DriveOptions) -> Result<CampaignHandle> {
        let handle = self.resumable(id)?;
        let stop = Arc::new(AtomicBool::new(false));
        self.drive(handle, None, &stop, opts)
    }

    pub fn resume_campaign(self: &Arc<Self>, id: &str) -> Result<CampaignHandle> {
        let handle = self.resumable(id)?;
        self.spawn_worker(handle.clone(), None);
        Ok(handle)
    }

    fn resumable(&self, id: &str) -> Result<CampaignHandle> {
        let h = self.store.handle(id)?;
        if self.workers.lock().unwrap().contains_key(id) {
            return Err(ServiceError::Conflict(format!("campaign '{id}' already has a worker")));
        }
        if h.status != CampaignStatus::Paused {
            return Err(ServiceError::Conflict(format!("campaign '{id}' is {:?}, not paused", h.status)));
        }
        Ok(h)
    }

    /// Asks the worker to stop after the current iteration.
    pub fn pause_campaign(&self, id: &str) -> Result<CampaignHandle> {
        let h = self.store.handle(id)?;
        match self.workers.lock().unwrap().get(id) {
            Some(flag) => flag.store(true, Ordering::SeqCst),
            None => return Err(ServiceError::Conflict(format!("campaign '{id}' is {:?}, not running", h.status))),
        }
        Ok(h)
    }

    fn spawn_worker(self: &Arc<Self>, handle: CampaignHandle, dataset: Option<TargetDataset>) {
        let stop = Arc::new(AtomicBool::new(false));
        self.workers.lock().unwrap().insert(handle.id.clone(), stop.clone());
        let me = Arc::clone(self);
        thread::spawn(move || {
            let id = handle.id.clone();
            if let Err(e) = me.drive(handle, dataset, &stop, DriveOptions::default()) {
                log::error!("campaign {id}: {e}");
            }
            me.workers.lock().unwrap().remove(&id);
        });
    }

    /// The single writer of a campaign's handle and state while it runs.
    fn drive(
        &self,
        mut handle: CampaignHandle,
        dataset: Option<TargetDataset>,
        stop: &AtomicBool,
        opts: DriveOptions,
    ) -> Result<CampaignHandle> {
        handle.transition(CampaignStatus::Running)?;
        handle.error = None;
        self.store.save_handle(&handle)?;
        let run_dir = self.store.run_dir(&handle.id);
        let outcome = (|| -> Result<Option<String>> {
            let mut session = if run_dir.join(STATE_FILE).exists() {
                CampaignSession::resume(&run_dir)?
            } else {
                // interrupted before the first snapshot: start over
                let ds = match dataset {
                    Some(ds) => ds,
                    None => self.store.dataset(&handle.dataset)?,
                };
                if run_dir.exists() {
                    fs::remove_dir_all(&run_dir)?;
                }
                CampaignSession::start(&ds, handle.config.clone(), Some(&run_dir))?
            };
            loop {
                if session.is_finished() {
                    return Ok(session.state().stop_reason.clone());
                }
                if stop.load(Ordering::SeqCst) {
                    return Ok(None);
                }
                session.step()?;
                let mut h = self.store.handle(&handle.id)?;
                h.updated_at = Utc::now();
                self.store.save_handle(&h)?;
                if let Some(t) = opts.throttle {
                    thread::sleep(t);
                }
            }
        })();
        let mut handle = self.store.handle(&handle.id)?;
        match outcome {
            Ok(Some(reason)) => {
                handle.transition(CampaignStatus::Finished)?;
                handle.stop_reason = Some(reason);
            }
            Ok(None) => handle.transition(CampaignStatus::Paused)?,
            Err(e) => {
                handle.transition(CampaignStatus::Failed)?;
                handle.error = Some(e.to_string());
            }
        }
        self.store.save_handle(&handle)?;
        Ok(handle)
    }

    /// Last persisted state of a campaign, if it got that far.
    pub fn campaign_state(&self, id: &str) -> Result<Option<CampaignState>> {
        self.store.handle(id)?;
        let dir = self.store.run_dir(id);
        if !dir.join(STATE_FILE).exists() {
            return Ok(None);
        }
        Ok(Some(CampaignState::load(&dir)?))
    }

    pub fn get_campaign(&self, id: &str) -> Result<CampaignView> {
        let handle = self.store.handle(id)?;
        let state = self.campaign_state(id)?;
        Ok(CampaignView {
            handle,
            context_size: state.as_ref().map(|s| s.context.len()),
            reports: state.map(|s| s.reports).unwrap_or_default(),
        })
    }

    pub fn list_campaigns(&self) -> Result<Vec<CampaignHandle>> {
        self.store.list_campaigns()
    }

    pub fn campaign_report(&self, id: &str) -> Result<CampaignReport> {
        let handle = self.store.handle(id)?;
        let state = self.campaign_state(id)?;
        let reports: &[IterationReport] = state.as_ref().map(|s| s.reports.as_slice()).unwrap_or(&[]);
        let mut series = ReportSeries::default();
        for r in reports {
            series.iteration.push(r.iteration);
            series.cutoff.push(r.cutoff);
            series.median_activity.push(r.median_activity);
            series.context_size.push(r.context_size);
            series.generated.push(r.generated);
            series.valid.push(r.valid);
            series.accepted.push(r.accepted);
        }
        Ok(CampaignReport {
            id: handle.id,
            status: handle.status,
            stop_reason: handle.stop_reason,
            initial_cutoff: state.as_ref().map(|s| s.initial_cutoff),
            series,
            tsv: reports_to_tsv(reports),
        })
    }

    /// Session history, or an empty one for a session not yet written.
    pub fn session(&self, id: &str) -> Result<SessionRecord> {
        check_id("session", id)?;
        if !self.store.has_session(id) {
            return Err(ServiceError::not_found("session", id));
        }
        self.store.session(id)
    }

    fn session_or_empty(&self, id: &str) -> Result<SessionRecord> {
        match self.store.session(id) {
            Err(ServiceError::NotFound { .. }) => Ok(SessionRecord { id: id.into(), history: Vec::new() }),
            other => other,
        }
    }

    /// Runs one modification and appends it to the session, creating the
    /// session on first use. Accepted molecules of the session are passed to
    /// the backend as reference examples.
    pub fn modify(&self, session_id: &str, req: &ModifyRequest) -> Result<ModifyResponse> {
        check_id("session", session_id)?;
        let mol = parse_smiles(req.molecule.trim())?;
        let vocab = self.vocab()?;
        let references: Vec<PropertyExample> = self
            .pool(session_id)
            .unwrap_or_default()
            .into_iter()
            .flat_map(|p| {
                [
                    PropertyExample { smiles: p.smiles.clone(), property: Property::MolecularWeight, value: p.properties.molecular_weight },
                    PropertyExample { smiles: p.smiles, property: Property::Logp, value: p.properties.logp },
                ]
            })
            .collect();
        let result = modify_molecule(&self.generator, &req.molecule, &req.instruction, &references, &vocab)?;
        let before = depict(&mol, &result.input);
        let after = result
            .output
            .as_deref()
            .and_then(|s| parse_smiles(s).ok().map(|m| depict(&m, s)));
        let _guard = self.session_lock.lock().unwrap();
        let index = self.session_or_empty(session_id)?.history.len();
        let entry = SessionEntry {
            index,
            input: result.input.clone(),
            instruction: req.instruction.clone(),
            result: result.output.clone(),
            raw_output: result.raw_output.clone(),
            valid: result.valid,
            error: result.error.clone(),
            deltas: result.deltas,
            accepted: false,
            created_at: Utc::now(),
        };
        self.store.append_session_event(session_id, &SessionEvent::Modified { entry })?;
        let session = self.store.session(session_id)?;
        Ok(ModifyResponse { result, before, after, session })
    }

    /// Marks a valid history entry as accepted into the session pool.
    pub fn accept(&self, session_id: &str, index: usize) -> Result<SessionRecord> {
        let _guard = self.session_lock.lock().unwrap();
        let s = self.session(session_id)?;
        let entry = s
            .history
            .get(index)
            .ok_or_else(|| ServiceError::Validation(format!("session '{session_id}' has no entry {index}")))?;
        if !entry.valid {
            return Err(ServiceError::Validation(format!("entry {index} has no valid result to accept")));
        }
        if !entry.accepted {
            self.store.append_session_event(session_id, &SessionEvent::Accepted { index, at: Utc::now() })?;
        }
        self.store.session(session_id)
    }

    /// Accepted results with freshly computed properties.
    pub fn pool(&self, session_id: &str) -> Result<Vec<PoolEntry>> {
        let s = self.session(session_id)?;
        let vocab = self.vocab()?;
        let mut out = Vec::new();
        for e in s.history.iter().filter(|e| e.accepted) {
            let Some(smiles) = &e.result else { continue };
            let mol = parse_smiles(smiles)?;
            let properties = property_profile(&mol, &vocab).map_err(|e| ServiceError::Internal(e.to_string()))?;
            out.push(PoolEntry { index: e.index, smiles: to_canonical(&mol).into_string(), properties });
        }
        Ok(out)
    }
}

/// Data directory used when none is given.
pub fn default_data_dir() -> &'static Path {
    Path::new("leadopt-data")
}
