use std::fmt;

use serde::{Deserialize, Serialize};

use super::PropertyProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Activity,
    MolecularWeight,
    SaScore,
    Logp,
    Tpsa,
}

impl Property {
    pub fn label(self) -> &'static str {
        match self {
            Property::Activity => "activity",
            Property::MolecularWeight => "molecular weight",
            Property::SaScore => "SA score",
            Property::Logp => "logP",
            Property::Tpsa => "tPSA",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Property::Activity => "activity",
            Property::MolecularWeight => "molecular_weight",
            Property::SaScore => "sa_score",
            Property::Logp => "logp",
            Property::Tpsa => "tpsa",
        }
    }
}

/// `above` and `below` are strict; `range` includes both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionKind {
    Above { value: f64 },
    Below { value: f64 },
    Range { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub property: Property,
    #[serde(flatten)]
    pub kind: ConditionKind,
}

impl ConditionSpec {
    pub fn above(property: Property, value: f64) -> Self {
        ConditionSpec { property, kind: ConditionKind::Above { value } }
    }

    pub fn below(property: Property, value: f64) -> Self {
        ConditionSpec { property, kind: ConditionKind::Below { value } }
    }

    /// Panics unless `low < high`; use [`ConditionSpec::validate`] for
    /// untrusted input.
    pub fn range(property: Property, low: f64, high: f64) -> Self {
        let c = ConditionSpec { property, kind: ConditionKind::Range { low, high } };
        c.validate().expect("invalid range condition");
        c
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.kind {
            ConditionKind::Above { value } | ConditionKind::Below { value } if !value.is_finite() => {
                Err(format!("{} bound is not finite", self.property.label()))
            }
            ConditionKind::Range { low, high } if !(low.is_finite() && high.is_finite() && low < high) => {
                Err(format!("{} range needs finite bounds with low < high", self.property.label()))
            }
            _ => Ok(()),
        }
    }

    pub fn holds(&self, value: f64) -> bool {
        match self.kind {
            ConditionKind::Above { value: v } => value > v,
            ConditionKind::Below { value: v } => value < v,
            ConditionKind::Range { low, high } => low <= value && value <= high,
        }
    }
}

impl fmt::Display for ConditionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.property.label();
        match self.kind {
            ConditionKind::Above { value } => write!(f, "{name} above {value}"),
            ConditionKind::Below { value } => write!(f, "{name} below {value}"),
            ConditionKind::Range { low, high } => write!(f, "{name} between {low} and {high}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub condition: ConditionSpec,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub outcomes: Vec<ConditionOutcome>,
    pub passed: bool,
}

/// Evaluates each condition on its own; the report passes when all do.
pub fn check_conditions(profile: &PropertyProfile, predicted_activity: f64, conditions: &[ConditionSpec]) -> ConditionReport {
    let outcomes: Vec<ConditionOutcome> = conditions
        .iter()
        .map(|c| {
            let value = profile.get(c.property).unwrap_or(predicted_activity);
            ConditionOutcome { condition: *c, value, passed: c.holds(value) }
        })
        .collect();
    let passed = outcomes.iter().all(|o| o.passed);
    ConditionReport { outcomes, passed }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(mw: f64, sa: f64) -> PropertyProfile {
        PropertyProfile { molecular_weight: mw, logp: 3.0, tpsa: 50.0, sa_score: sa }
    }

    #[test]
    fn lead_conditions() {
        let mw = ConditionSpec::range(Property::MolecularWeight, 320.0, 420.0);
        let sa = ConditionSpec::below(Property::SaScore, 3.0);
        let act = ConditionSpec::above(Property::Activity, 10.0);
        let r = check_conditions(&profile(350.0, 3.4), 11.0, &[mw, sa, act]);
        assert!(r.outcomes[0].passed);
        assert!(!r.outcomes[1].passed);
        assert!(r.outcomes[2].passed);
        assert!(!r.passed);
        assert!(check_conditions(&profile(1.0, 9.0), 0.0, &[]).passed);
    }

    #[test]
    fn json_shape() {
        let c = ConditionSpec::range(Property::MolecularWeight, 320.0, 420.0);
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(j, r#"{"property":"molecular_weight","kind":"range","low":320.0,"high":420.0}"#);
        assert_eq!(serde_json::from_str::<ConditionSpec>(&j).unwrap(), c);
        assert_eq!(c.to_string(), "molecular weight between 320 and 420");
    }

    #[test]
    fn bad_range() {
        let c = ConditionSpec { property: Property::Logp, kind: ConditionKind::Range { low: 4.0, high: 2.0 } };
        assert!(c.validate().is_err());
    }
}
