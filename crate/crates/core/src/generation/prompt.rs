use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::properties::{ConditionSpec, Property, PropertyProfile};

pub const OUTPUT_SCHEMA_NOTE: &str = "Return the molecules as a JSON array of objects, each with a \"smiles\" field, \
for example [{\"smiles\": \"c1ccccc1O\"}]. Do not add any other fields.";

const EXTRA_LABELS: [Property; 4] = [Property::MolecularWeight, Property::Logp, Property::Tpsa, Property::SaScore];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptExample {
    pub smiles: String,
    pub activity: f64,
    /// Rendered only when the prompt is built with extra labels.
    #[serde(default)]
    pub labels: Option<PropertyProfile>,
}

impl PromptExample {
    pub fn new(smiles: impl Into<String>, activity: f64) -> Self {
        PromptExample { smiles: smiles.into(), activity, labels: None }
    }
}

/// Order in which context entries are handed to the prompt. The prompt
/// itself keeps whatever order it is given.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleOrder {
    #[default]
    Descending,
    Ascending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub examples: Vec<PromptExample>,
    pub conditions: Vec<ConditionSpec>,
    pub lead: String,
    pub batch_size: usize,
    pub output_schema_note: String,
    /// Upper bound on prompt length in characters. Examples are dropped from
    /// the tail until the prompt fits; at least one is always kept.
    pub char_budget: Option<usize>,
}

impl PromptSpec {
    pub fn new(examples: Vec<PromptExample>, lead: impl Into<String>, batch_size: usize) -> Self {
        PromptSpec {
            examples,
            conditions: Vec::new(),
            lead: lead.into(),
            batch_size,
            output_schema_note: OUTPUT_SCHEMA_NOTE.to_string(),
            char_budget: None,
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.examples.is_empty() {
            return Err(GenerationError::InvalidSpec("no examples".into()));
        }
        if self.batch_size == 0 {
            return Err(GenerationError::InvalidSpec("batch size must be at least 1".into()));
        }
        if self.lead.trim().is_empty() || self.lead.contains(char::is_whitespace) {
            return Err(GenerationError::InvalidSpec("lead must be a single SMILES token".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub examples_included: usize,
    /// Examples dropped to respect the character budget.
    pub examples_truncated: usize,
}

fn example_line(e: &PromptExample, extra: bool) -> String {
    let mut s = format!("SMILES: {} | activity: {:.2}", e.smiles, e.activity);
    if extra {
        if let Some(p) = &e.labels {
            for prop in EXTRA_LABELS {
                let _ = write!(s, " | {}: {:.2}", prop.label(), p.get(prop).unwrap_or(f64::NAN));
            }
        }
    }
    s
}

/// Splits an example line back into SMILES, activity and any further
/// `label: value` pairs. Returns `None` for lines that are not examples.
pub fn parse_example_line(line: &str) -> Option<(String, f64, Vec<(String, f64)>)> {
    let rest = line.strip_prefix("SMILES: ")?;
    let mut parts = rest.split(" | ");
    let smiles = parts.next()?.trim().to_string();
    let activity = parts.next()?.strip_prefix("activity: ")?.trim().parse().ok()?;
    let mut extra = Vec::new();
    for p in parts {
        let (k, v) = p.split_once(": ")?;
        extra.push((k.to_string(), v.trim().parse().ok()?));
    }
    Some((smiles, activity, extra))
}

/// Deterministic many-shot generation prompt: task, examples in the given
/// order, requirements, lead and output format.
///
/// ```
/// use leadopt::generation::{build_generation_prompt, PromptExample, PromptSpec};
/// let spec = PromptSpec::new(vec![PromptExample::new("CCO", 5.0)], "c1ccccc1", 3);
/// let p = build_generation_prompt(&spec, false).unwrap();
/// assert!(p.text.contains("SMILES: CCO | activity: 5.00"));
/// assert!(p.text.contains("Lead molecule: c1ccccc1"));
/// ```
pub fn build_generation_prompt(spec: &PromptSpec, include_extra_labels: bool) -> Result<Prompt, GenerationError> {
    spec.validate()?;
    let mut head = String::from(
        "You are an expert medicinal chemist working on lead optimization.\n\
         The examples below are molecules with measured activity on a pCHEMBL-like scale (higher is more active).\n",
    );
    if include_extra_labels {
        head.push_str("Each example also lists computed molecular properties.\n");
    }
    head.push_str("\nExamples:\n");

    let mut tail = String::from("\nRequirements:\n- higher activity than the examples where possible\n");
    for c in &spec.conditions {
        let _ = writeln!(tail, "- {c}");
    }
    let _ = write!(
        tail,
        "\nLead molecule: {}\n\nPropose {} new molecules that modify the lead molecule and meet the requirements.\n{}\n",
        spec.lead, spec.batch_size, spec.output_schema_note
    );

    let lines: Vec<String> = spec.examples.iter().map(|e| example_line(e, include_extra_labels)).collect();
    let mut len = head.len() + tail.len();
    let mut kept = 0;
    for l in &lines {
        let next = len + l.len() + 1;
        if kept > 0 && spec.char_budget.is_some_and(|b| next > b) {
            break;
        }
        len = next;
        kept += 1;
    }
    let mut text = head;
    for l in &lines[..kept] {
        text.push_str(l);
        text.push('\n');
    }
    text.push_str(&tail);
    if kept < lines.len() {
        log::info!("prompt budget reached: dropped {} of {} examples", lines.len() - kept, lines.len());
    }
    Ok(Prompt { text, examples_included: kept, examples_truncated: lines.len() - kept })
}

pub fn build_prediction_prompt(examples: &[(String, f64)], query: &str) -> Result<String, GenerationError> {
    if examples.is_empty() {
        return Err(GenerationError::InvalidSpec("no examples".into()));
    }
    let mut s = String::from(
        "Predict the activity (pCHEMBL-like scale, higher is more active) of the query molecule \
         from the labeled examples.\n\nExamples:\n",
    );
    for (smi, a) in examples {
        let _ = writeln!(s, "SMILES: {smi} | activity: {a:.2}");
    }
    let _ = write!(
        s,
        "\nQuery molecule: {query}\n\nAnswer with a JSON object of the form {{\"activity\": <number>}} and nothing else.\n"
    );
    Ok(s)
}

/// A molecule with one labeled property, used as reference material in
/// modification prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyExample {
    pub smiles: String,
    pub property: Property,
    pub value: f64,
}

pub fn build_modification_prompt(molecule: &str, instruction: &str, context: &[PropertyExample]) -> String {
    let mut s = format!(
        "Modify the molecule below according to the instruction.\n\nMolecule: {molecule}\nInstruction: {}\n",
        instruction.replace('\n', " ")
    );
    if !context.is_empty() {
        s.push_str("\nReference molecules with known properties:\n");
        for e in context {
            let _ = writeln!(s, "SMILES: {} | {}: {:.2}", e.smiles, e.property.label(), e.value);
        }
    }
    s.push_str("\nReturn a JSON object of the form {\"smiles\": \"<modified SMILES>\"} and nothing else.\n");
    s
}
