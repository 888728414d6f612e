use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DataError, TargetDataset, DEFAULT_BUTINA_THRESHOLD};
use crate::features::{butina_cluster, circular_fingerprint, Clustering, FragmentVocabulary, DEFAULT_FP_BITS, DEFAULT_FP_RADIUS};
use crate::molgraph::parse_smiles;
use crate::properties::property_profile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub threshold: f64,
    pub best_size: usize,
    pub lead_pool_size: usize,
    /// Members averaged when scoring a cluster.
    pub score_top_k: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig { threshold: DEFAULT_BUTINA_THRESHOLD, best_size: 20, lead_pool_size: 50, score_top_k: 5 }
    }
}

/// Record indices of each pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pools {
    pub best20: Vec<usize>,
    pub pool50: Vec<usize>,
    pub allminus20: Vec<usize>,
    /// Clusters, best score first, whose members fed `best20`.
    pub best_clusters: Vec<usize>,
    pub clustering: Clustering,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster_id: usize,
    pub members: Vec<usize>,
    pub size: usize,
    pub mean_activity: f64,
    pub max_activity: f64,
    pub mean_molecular_weight: f64,
    pub mean_sa_score: f64,
    pub mean_tpsa: f64,
    pub mean_logp: f64,
    /// 1.37 · activity / heavy atoms, averaged; reported only.
    pub mean_ligand_efficiency: f64,
}

/// Higher activity first, then canonical SMILES.
fn by_activity(ds: &TargetDataset) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        let (ra, rb) = (&ds.records[a], &ds.records[b]);
        rb.activity.total_cmp(&ra.activity).then_with(|| ra.smiles.cmp(&rb.smiles))
    }
}

pub fn prepare_pools(ds: &TargetDataset, threshold: f64) -> Result<TargetDataset, DataError> {
    prepare_pools_with(ds, &PoolConfig { threshold, ..PoolConfig::default() })
}

/// Clusters the records, takes the best set from the top-scoring cluster
/// (topped up from the next clusters when it is too small) and the lead pool
/// from records outside those clusters.
pub fn prepare_pools_with(ds: &TargetDataset, cfg: &PoolConfig) -> Result<TargetDataset, DataError> {
    let needed = cfg.best_size + cfg.lead_pool_size;
    if ds.len() < needed {
        return Err(DataError::InsufficientData { needed, available: ds.len() });
    }
    let fps = ds
        .records
        .iter()
        .map(|r| {
            let mol = parse_smiles(&r.smiles).expect("dataset records hold valid SMILES");
            circular_fingerprint(&mol, DEFAULT_FP_RADIUS, DEFAULT_FP_BITS)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let clustering = butina_cluster(&fps, cfg.threshold);
    let order = by_activity(ds);

    let mut scored: Vec<(f64, String, usize)> = clustering
        .clusters
        .iter()
        .enumerate()
        .map(|(id, members)| {
            let mut m = members.clone();
            m.sort_by(&order);
            let k = m.len().min(cfg.score_top_k);
            let score = m[..k].iter().map(|&i| ds.records[i].activity).sum::<f64>() / k as f64;
            (score, ds.records[m[0]].smiles.clone(), id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

    let mut best = Vec::new();
    let mut best_clusters = Vec::new();
    for &(_, _, id) in &scored {
        if best.len() >= cfg.best_size {
            break;
        }
        let mut m = clustering.clusters[id].clone();
        m.sort_by(&order);
        best.extend(m.into_iter().take(cfg.best_size - best.len()));
        best_clusters.push(id);
    }
    let excluded: BTreeSet<usize> = best_clusters.iter().flat_map(|&c| clustering.clusters[c].iter().copied()).collect();
    let mut outside: Vec<usize> = (0..ds.len()).filter(|i| !excluded.contains(i)).collect();
    if outside.len() < cfg.lead_pool_size {
        return Err(DataError::InsufficientData { needed: cfg.lead_pool_size, available: outside.len() });
    }
    outside.sort_by(&order);
    outside.truncate(cfg.lead_pool_size);
    let best_set: BTreeSet<usize> = best.iter().copied().collect();
    let allminus = (0..ds.len()).filter(|i| !best_set.contains(i)).collect();

    let mut out = ds.clone();
    out.pools = Some(Pools {
        best20: best,
        pool50: outside,
        allminus20: allminus,
        best_clusters,
        clustering,
        threshold: cfg.threshold,
    });
    Ok(out)
}

/// Per-cluster activity and property aggregates.
pub fn profile_clusters(
    ds: &TargetDataset,
    clustering: &Clustering,
    vocab: &FragmentVocabulary,
) -> Result<Vec<ClusterProfile>, DataError> {
    let mut out = Vec::with_capacity(clustering.clusters.len());
    for (id, members) in clustering.clusters.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let n = members.len() as f64;
        let (mut act, mut max_act, mut mw, mut sa, mut tpsa, mut logp, mut le) =
            (0.0, f64::NEG_INFINITY, 0.0, 0.0, 0.0, 0.0, 0.0);
        for &i in members {
            let r = &ds.records[i];
            let mol = parse_smiles(&r.smiles).expect("dataset records hold valid SMILES");
            let p = property_profile(&mol, vocab)?;
            act += r.activity;
            max_act = max_act.max(r.activity);
            mw += p.molecular_weight;
            sa += p.sa_score;
            tpsa += p.tpsa;
            logp += p.logp;
            le += 1.37 * r.activity / mol.heavy_atom_count().max(1) as f64;
        }
        out.push(ClusterProfile {
            cluster_id: id,
            members: members.clone(),
            size: members.len(),
            mean_activity: act / n,
            max_activity: max_act,
            mean_molecular_weight: mw / n,
            mean_sa_score: sa / n,
            mean_tpsa: tpsa / n,
            mean_logp: logp / n,
            mean_ligand_efficiency: le / n,
        });
    }
    Ok(out)
}
