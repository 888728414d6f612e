use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Context;
use crate::generation::GeneratedBatch;
use crate::molgraph::parse_smiles;
use crate::properties::{check_conditions, property_profile, ConditionReport, ConditionSpec, PropertyProfile};
use crate::qsar::{consensus_predict, Consensus, EnsemblePredictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Invalid,
    MultiFragment,
    Duplicate,
    Unfeaturizable,
    BelowCutoff,
    ConditionsFailed,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Invalid => "invalid",
            RejectReason::MultiFragment => "multi_fragment",
            RejectReason::Duplicate => "duplicate",
            RejectReason::Unfeaturizable => "unfeaturizable",
            RejectReason::BelowCutoff => "below_cutoff",
            RejectReason::ConditionsFailed => "conditions_failed",
        }
    }
}

/// What happened to one generated candidate, in response order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDecision {
    pub smiles: String,
    pub canonical: Option<String>,
    pub consensus: Option<Consensus>,
    pub profile: Option<PropertyProfile>,
    pub conditions: Option<ConditionReport>,
    /// `None` when accepted.
    pub rejected: Option<RejectReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedCandidate {
    pub smiles: String,
    /// Consensus mean of the three views.
    pub label: f64,
    pub per_view: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub accepted: Vec<AcceptedCandidate>,
    pub decisions: Vec<CandidateDecision>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterOptions {
    pub conditions: Vec<ConditionSpec>,
    /// Property conditions gate acceptance instead of only being reported.
    pub strict: bool,
}

/// Acceptance rule for one candidate: every view strictly above the cutoff.
pub fn consensus_accepts(c: &Consensus, cutoff: f64) -> bool {
    c.all_above(cutoff)
}

/// Keeps valid single-fragment candidates that are new to the context and
/// whose three per-view predictions all exceed `cutoff`, labelled with the
/// consensus mean. Property conditions are evaluated for every scored
/// candidate and only gate acceptance in strict mode.
pub fn filter_and_label(
    batch: &GeneratedBatch,
    ens: &EnsemblePredictor,
    cutoff: f64,
    context: &Context,
    opts: &FilterOptions,
) -> FilterOutcome {
    let mut seen: HashSet<&str> = HashSet::new();
    // structural screening is sequential so duplicates resolve in response order
    let screened: Vec<(Option<RejectReason>, Option<crate::molgraph::MolGraph>)> = batch
        .molecules
        .iter()
        .map(|m| match &m.canonical {
            None => (Some(RejectReason::Invalid), None),
            Some(c) => {
                if context.contains(c) || !seen.insert(c.as_str()) {
                    return (Some(RejectReason::Duplicate), None);
                }
                match parse_smiles(c) {
                    Err(_) => (Some(RejectReason::Invalid), None),
                    Ok(mol) if !mol.is_single_fragment() => (Some(RejectReason::MultiFragment), None),
                    Ok(mol) => (None, Some(mol)),
                }
            }
        })
        .collect();
    let decisions: Vec<CandidateDecision> = batch
        .molecules
        .par_iter()
        .zip(screened.into_par_iter())
        .map(|(m, (early, mol))| {
            let mut d = CandidateDecision {
                smiles: m.smiles.clone(),
                canonical: m.canonical.clone(),
                consensus: None,
                profile: None,
                conditions: None,
                rejected: early,
            };
            let Some(mol) = mol else { return d };
            let (Ok(c), Ok(p)) = (consensus_predict(ens, &mol), property_profile(&mol, ens.vocab())) else {
                d.rejected = Some(RejectReason::Unfeaturizable);
                return d;
            };
            let report = check_conditions(&p, c.mean, &opts.conditions);
            d.rejected = if !consensus_accepts(&c, cutoff) {
                Some(RejectReason::BelowCutoff)
            } else if opts.strict && !report.passed {
                Some(RejectReason::ConditionsFailed)
            } else {
                None
            };
            d.consensus = Some(c);
            d.profile = Some(p);
            d.conditions = Some(report);
            d
        })
        .collect();
    let accepted = decisions
        .iter()
        .filter(|d| d.rejected.is_none())
        .map(|d| {
            let c = d.consensus.expect("accepted candidates are scored");
            AcceptedCandidate { smiles: d.canonical.clone().expect("accepted candidates are valid"), label: c.mean, per_view: c.per_view }
        })
        .collect();
    FilterOutcome { accepted, decisions }
}
