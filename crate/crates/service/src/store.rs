//! Files under one data directory: a JSON document per dataset and per
//! campaign handle, a directory per campaign run, and an append-only JSON
//! lines file per session.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use leadopt::campaign::CampaignConfig;
use leadopt::data::{RowError, TargetDataset};
use leadopt::properties::PropertyProfile;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const DATASET_SCHEMA: &str = "leadopt-dataset";
pub const HANDLE_SCHEMA: &str = "leadopt-campaign-handle";
pub const SESSION_SCHEMA: &str = "leadopt-session";
pub const FORMAT_VERSION: u32 = 1;

/// Ids become file names, so they are restricted to a safe alphabet.
pub fn check_id(kind: &str, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(ServiceError::Validation(format!("{kind} id must be 1-64 characters of [A-Za-z0-9._-]: {id:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignStatus {
    Created,
    Running,
    Paused,
    Finished,
    Failed,
}

impl CampaignStatus {
    /// created → running → (paused → running)* → finished | failed.
    /// A campaign can also fail before it starts running.
    pub fn can_become(self, next: CampaignStatus) -> bool {
        use CampaignStatus::*;
        matches!(
            (self, next),
            (Created, Running) | (Created, Failed) | (Running, Paused) | (Running, Finished) | (Running, Failed) | (Paused, Running)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, CampaignStatus::Finished | CampaignStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignHandle {
    pub schema: String,
    pub version: u32,
    pub id: String,
    pub dataset: String,
    pub status: CampaignStatus,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub config: CampaignConfig,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub stop_reason: Option<String>,
}

impl CampaignHandle {
    pub fn new(id: &str, dataset: &str, config: CampaignConfig) -> Self {
        let now = Utc::now();
        CampaignHandle {
            schema: HANDLE_SCHEMA.into(),
            version: FORMAT_VERSION,
            id: id.into(),
            dataset: dataset.into(),
            status: CampaignStatus::Created,
            created_at: now,
            updated_at: now,
            config,
            error: None,
            stop_reason: None,
        }
    }

    pub fn transition(&mut self, next: CampaignStatus) -> Result<()> {
        if !self.status.can_become(next) {
            return Err(ServiceError::Conflict(format!(
                "campaign '{}' cannot go from {:?} to {:?}",
                self.id, self.status, next
            )));
        }
        self.status = next;
        self.updated_at = Utc::now();
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub schema: String,
    pub version: u32,
    pub dataset: TargetDataset,
    #[serde(default)]
    pub row_errors: Vec<RowError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub records: usize,
    pub has_pools: bool,
    pub row_errors: usize,
}

/// One modification attempt in a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub index: usize,
    pub input: String,
    pub instruction: String,
    pub result: Option<String>,
    pub raw_output: String,
    pub valid: bool,
    #[serde(default)]
    pub error: Option<String>,
    pub deltas: Option<PropertyProfile>,
    pub accepted: bool,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub history: Vec<SessionEntry>,
}

/// Lines of a session file after the header. Accepting an entry appends an
/// event rather than rewriting the entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Modified { entry: SessionEntry },
    Accepted { index: usize, at: DateTime<Utc> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SessionHeader {
    schema: String,
    version: u32,
    id: String,
    created_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))
}

fn check_schema(path: &Path, schema: &str, version: u32, want: &str) -> Result<()> {
    if schema != want || version != FORMAT_VERSION {
        return Err(ServiceError::Internal(format!("{}: unsupported format {schema} v{version}", path.display())));
    }
    Ok(())
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["datasets", "campaigns", "sessions"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dataset_path(&self, name: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{name}.json"))
    }

    pub fn save_dataset(&self, dataset: &TargetDataset, row_errors: &[RowError]) -> Result<()> {
        check_id("dataset", &dataset.target_name)?;
        let file = DatasetFile {
            schema: DATASET_SCHEMA.into(),
            version: FORMAT_VERSION,
            dataset: dataset.clone(),
            row_errors: row_errors.to_vec(),
        };
        write_atomic(&self.dataset_path(&dataset.target_name), &serde_json::to_string(&file)?)
    }

    pub fn dataset_file(&self, name: &str) -> Result<DatasetFile> {
        check_id("dataset", name)?;
        let path = self.dataset_path(name);
        if !path.exists() {
            return Err(ServiceError::DatasetMissing(name.into()));
        }
        let f: DatasetFile = read_json(&path)?;
        check_schema(&path, &f.schema, f.version, DATASET_SCHEMA)?;
        Ok(f)
    }

    pub fn dataset(&self, name: &str) -> Result<TargetDataset> {
        Ok(self.dataset_file(name)?.dataset)
    }

    pub fn list_datasets(&self) -> Result<Vec<DatasetSummary>> {
        let mut out = Vec::new();
        for name in self.names("datasets", ".json")? {
            let f = self.dataset_file(&name)?;
            out.push(DatasetSummary {
                name,
                records: f.dataset.len(),
                has_pools: f.dataset.pools.is_some(),
                row_errors: f.row_errors.len(),
            });
        }
        Ok(out)
    }

    fn names(&self, sub: &str, suffix: &str) -> Result<Vec<String>> {
        let mut names: Vec<String> = fs::read_dir(self.root.join(sub))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(suffix)).map(str::to_string))
            .filter(|n| check_id("", n).is_ok())
            .collect();
        names.sort();
        Ok(names)
    }

    pub fn campaign_dir(&self, id: &str) -> PathBuf {
        self.root.join("campaigns").join(id)
    }

    /// Where the campaign engine keeps its state, model and audit log.
    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.campaign_dir(id).join("run")
    }

    fn handle_path(&self, id: &str) -> PathBuf {
        self.campaign_dir(id).join("handle.json")
    }

    pub fn has_campaign(&self, id: &str) -> bool {
        self.handle_path(id).exists()
    }

    pub fn save_handle(&self, h: &CampaignHandle) -> Result<()> {
        check_id("campaign", &h.id)?;
        write_atomic(&self.handle_path(&h.id), &serde_json::to_string_pretty(h)?)
    }

    /// Writes a new handle; fails if the id is taken.
    pub fn create_handle(&self, h: &CampaignHandle) -> Result<()> {
        check_id("campaign", &h.id)?;
        fs::create_dir_all(self.root.join("campaigns"))?;
        match fs::create_dir(self.campaign_dir(&h.id)) {
            Ok(()) => self.save_handle(h),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(ServiceError::Conflict(format!("campaign '{}' already exists", h.id)))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn handle(&self, id: &str) -> Result<CampaignHandle> {
        check_id("campaign", id)?;
        let path = self.handle_path(id);
        if !path.exists() {
            return Err(ServiceError::not_found("campaign", id));
        }
        let h: CampaignHandle = read_json(&path)?;
        check_schema(&path, &h.schema, h.version, HANDLE_SCHEMA)?;
        Ok(h)
    }

    pub fn list_campaigns(&self) -> Result<Vec<CampaignHandle>> {
        let mut out = Vec::new();
        for e in fs::read_dir(self.root.join("campaigns"))?.filter_map(|e| e.ok()) {
            if let Some(name) = e.file_name().to_str() {
                if self.handle_path(name).exists() {
                    out.push(self.handle(name)?);
                }
            }
        }
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        Ok(out)
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.jsonl"))
    }

    pub fn has_session(&self, id: &str) -> bool {
        self.session_path(id).exists()
    }

    /// Appends one event, writing the header first for a new session.
    pub fn append_session_event(&self, id: &str, event: &SessionEvent) -> Result<()> {
        check_id("session", id)?;
        let path = self.session_path(id);
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut text = String::new();
        if f.metadata()?.len() == 0 {
            let h = SessionHeader {
                schema: SESSION_SCHEMA.into(),
                version: FORMAT_VERSION,
                id: id.into(),
                created_at: Utc::now(),
            };
            text.push_str(&serde_json::to_string(&h)?);
            text.push('\n');
        }
        text.push_str(&serde_json::to_string(event)?);
        text.push('\n');
        f.write_all(text.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Replays the session file. A trailing partial line (interrupted write)
    /// is ignored.
    pub fn session(&self, id: &str) -> Result<SessionRecord> {
        check_id("session", id)?;
        let path = self.session_path(id);
        if !path.exists() {
            return Err(ServiceError::not_found("session", id));
        }
        let text = fs::read_to_string(&path)?;
        let mut lines = text.split_inclusive('\n').filter(|l| l.ends_with('\n'));
        let header: SessionHeader = match lines.next() {
            Some(l) => serde_json::from_str(l)?,
            None => return Ok(SessionRecord { id: id.into(), history: Vec::new() }),
        };
        check_schema(&path, &header.schema, header.version, SESSION_SCHEMA)?;
        let mut history: Vec<SessionEntry> = Vec::new();
        for l in lines {
            match serde_json::from_str(l)? {
                SessionEvent::Modified { entry } => history.push(entry),
                SessionEvent::Accepted { index, .. } => {
                    if let Some(e) = history.get_mut(index) {
                        e.accepted = true;
                    }
                }
            }
        }
        Ok(SessionRecord { id: id.into(), history })
    }
}
