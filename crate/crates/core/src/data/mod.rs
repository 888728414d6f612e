//! Activity datasets and the best20 / pool50 / allminus20 pools.

mod pools;
pub mod synthetic;

use std::collections::HashMap;
use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureError;
use crate::molgraph::{parse_smiles, to_canonical};
use crate::properties::{crippen_logp, ertl_tpsa, molecular_weight, PropertyError};

pub use pools::{prepare_pools, prepare_pools_with, profile_clusters, ClusterProfile, PoolConfig, Pools};
pub use synthetic::{synthetic_library, synthetic_records};

pub const DEFAULT_MIN_ACTIVITY: f64 = 4.0;
pub const DEFAULT_BUTINA_THRESHOLD: f64 = 0.65;
const RECOMPUTE_TOLERANCE: f64 = 0.5;
const COLUMNS: [&str; 6] = ["smiles", "activity", "mw", "sa_score", "tpsa", "logp"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset file {0} does not exist")]
    FileMissing(PathBuf),
    #[error("header does not match smiles,activity[,mw,sa_score,tpsa,logp]: {0}")]
    SchemaMismatch(String),
    #[error("need at least {needed} records, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Property(#[from] PropertyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityRecord {
    pub smiles: String,
    pub activity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sa_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tpsa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logp: Option<f64>,
}

impl ActivityRecord {
    pub fn new(smiles: impl Into<String>, activity: f64) -> Self {
        ActivityRecord { smiles: smiles.into(), activity, mw: None, sa_score: None, tpsa: None, logp: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDataset {
    pub target_name: String,
    pub records: Vec<ActivityRecord>,
    #[serde(default)]
    pub pools: Option<Pools>,
}

impl TargetDataset {
    /// Canonicalizes, filters and deduplicates records the same way
    /// [`load_dataset`] does; returns the dataset and rejected entries.
    pub fn from_records(target_name: &str, records: Vec<ActivityRecord>, min_activity: f64) -> (Self, Vec<RowError>) {
        let mut errors = Vec::new();
        let mut kept: Vec<ActivityRecord> = Vec::new();
        let mut by_smiles: HashMap<String, usize> = HashMap::new();
        for (i, mut r) in records.into_iter().enumerate() {
            let line = i + 2;
            match check_record(&mut r) {
                Err(reason) => errors.push(RowError { line, reason }),
                Ok(()) if r.activity < min_activity => {}
                Ok(()) => match by_smiles.get(&r.smiles) {
                    Some(&k) => {
                        if r.activity > kept[k].activity {
                            kept[k] = r;
                        }
                    }
                    None => {
                        by_smiles.insert(r.smiles.clone(), kept.len());
                        kept.push(r);
                    }
                },
            }
        }
        (TargetDataset { target_name: target_name.to_string(), records: kept, pools: None }, errors)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn smiles(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.smiles.as_str()).collect()
    }

    pub fn activities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.activity).collect()
    }
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub line: usize,
    pub reason: String,
}

fn check_record(r: &mut ActivityRecord) -> Result<(), String> {
    if !r.activity.is_finite() {
        return Err("activity is not finite".into());
    }
    let mol = parse_smiles(&r.smiles).map_err(|e| format!("invalid SMILES: {e}"))?;
    if !mol.is_single_fragment() {
        return Err("multi-fragment SMILES".into());
    }
    let logp = crippen_logp(&mol).map_err(|e| e.to_string())?;
    let checks = [("mw", r.mw, molecular_weight(&mol)), ("tpsa", r.tpsa, ertl_tpsa(&mol)), ("logp", r.logp, logp)];
    for (name, given, computed) in checks {
        if let Some(g) = given {
            if (g - computed).abs() > RECOMPUTE_TOLERANCE {
                log::warn!("{}: given {name} {g} differs from computed {computed:.3}", r.smiles);
            }
        }
    }
    r.smiles = to_canonical(&mol).into_string();
    Ok(())
}

/// [`load_dataset_with`] using the default activity floor.
pub fn load_dataset(path: &Path, target_name: &str) -> Result<(TargetDataset, Vec<RowError>), DataError> {
    load_dataset_with(path, target_name, DEFAULT_MIN_ACTIVITY)
}

/// Reads `smiles,activity[,mw,sa_score,tpsa,logp]`. Bad rows are returned
/// alongside the dataset with their line numbers; rows below `min_activity`
/// are dropped; repeated molecules keep their highest activity.
pub fn load_dataset_with(
    path: &Path,
    target_name: &str,
    min_activity: f64,
) -> Result<(TargetDataset, Vec<RowError>), DataError> {
    if !path.exists() {
        return Err(DataError::FileMissing(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(File::open(path)?);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let schema_ok = header.len() >= 2
        && header[0] == "smiles"
        && header[1] == "activity"
        && header[2..].iter().all(|h| COLUMNS[2..].contains(&h.as_str()));
    if !schema_ok {
        return Err(DataError::SchemaMismatch(header.join(",")));
    }
    let col = |name: &str| header.iter().position(|h| h == name);
    let (mw_i, sa_i, tpsa_i, logp_i) = (col("mw"), col("sa_score"), col("tpsa"), col("logp"));

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut lines = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(RowError { line, reason: e.to_string() });
                continue;
            }
        };
        let optional = |idx: Option<usize>| -> Result<Option<f64>, String> {
            match idx.and_then(|k| row.get(k)) {
                None | Some("") => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| format!("bad number {v:?}")),
            }
        };
        let parsed = (|| -> Result<ActivityRecord, String> {
            let smiles = row.get(0).filter(|s| !s.is_empty()).ok_or("missing SMILES")?;
            let activity: f64 =
                row.get(1).ok_or("missing activity")?.parse().map_err(|_| "activity is not a number".to_string())?;
            Ok(ActivityRecord {
                smiles: smiles.to_string(),
                activity,
                mw: optional(mw_i)?,
                sa_score: optional(sa_i)?,
                tpsa: optional(tpsa_i)?,
                logp: optional(logp_i)?,
            })
        })();
        match parsed {
            Ok(r) => {
                records.push(r);
                lines.push(line);
            }
            Err(reason) => errors.push(RowError { line, reason }),
        }
    }
    let (ds, mut row_errors) = TargetDataset::from_records(target_name, records, min_activity);
    for e in &mut row_errors {
        e.line = lines[e.line - 2];
    }
    errors.extend(row_errors);
    errors.sort_by_key(|e| e.line);
    Ok((ds, errors))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the records in the input format; optional columns appear when
/// any record carries them.
pub fn write_dataset(ds: &TargetDataset, path: &Path) -> Result<(), DataError> {
    let has = |f: fn(&ActivityRecord) -> Option<f64>| ds.records.iter().any(|r| f(r).is_some());
    let extra: Vec<(&str, fn(&ActivityRecord) -> Option<f64>)> = vec![
        ("mw", |r| r.mw),
        ("sa_score", |r| r.sa_score),
        ("tpsa", |r| r.tpsa),
        ("logp", |r| r.logp),
    ];
    let extra: Vec<_> = extra.into_iter().filter(|(_, f)| has(*f)).collect();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["smiles", "activity"];
    header.extend(extra.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    for r in &ds.records {
        let mut row = vec![r.smiles.clone(), r.activity.to_string()];
        row.extend(extra.iter().map(|(_, f)| fmt_opt(f(r))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
