use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::backend::{Generator, Task};
use super::extract::{extract_json_array, extract_json_object};
use super::prompt::{build_modification_prompt, build_prediction_prompt, PropertyExample};
use super::GenerationError;
use crate::features::FragmentVocabulary;
use crate::molgraph::{parse_smiles, to_canonical};
use crate::properties::{property_profile, PropertyProfile};

/// Hex SHA-256 of the prompt text.
pub fn request_fingerprint(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedMolecule {
    /// Text as returned by the backend.
    pub smiles: String,
    /// Canonical form when the text parses.
    pub canonical: Option<String>,
    pub error: Option<String>,
    /// Same canonical form as an earlier entry of the batch.
    pub duplicate: bool,
}

impl GeneratedMolecule {
    pub fn is_valid(&self) -> bool {
        self.canonical.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedBatch {
    pub raw_response: String,
    pub molecules: Vec<GeneratedMolecule>,
    pub request_fingerprint: String,
}

impl GeneratedBatch {
    pub fn empty(request_fingerprint: String) -> Self {
        GeneratedBatch { raw_response: String::new(), molecules: Vec::new(), request_fingerprint }
    }

    pub fn valid_count(&self) -> usize {
        self.molecules.iter().filter(|m| m.is_valid()).count()
    }
}

/// Reads the first JSON array of `raw`. Elements may be objects with a
/// `smiles` string or bare strings; anything else becomes an invalid entry.
pub fn parse_generation_response(raw: &str, request_fingerprint: &str) -> Result<GeneratedBatch, GenerationError> {
    let items = extract_json_array(raw).ok_or_else(|| GenerationError::MalformedResponse { raw: raw.to_string() })?;
    let mut seen = HashSet::new();
    let molecules = items
        .iter()
        .map(|item| {
            let text = match item {
                Value::Object(o) => o.get("smiles").and_then(Value::as_str),
                Value::String(s) => Some(s.as_str()),
                _ => None,
            };
            let Some(text) = text else {
                return GeneratedMolecule {
                    smiles: item.to_string(),
                    canonical: None,
                    error: Some("entry has no \"smiles\" string".into()),
                    duplicate: false,
                };
            };
            match parse_smiles(text.trim()) {
                Ok(m) => {
                    let c = to_canonical(&m).into_string();
                    let duplicate = !seen.insert(c.clone());
                    GeneratedMolecule { smiles: text.to_string(), canonical: Some(c), error: None, duplicate }
                }
                Err(e) => GeneratedMolecule { smiles: text.to_string(), canonical: None, error: Some(e.to_string()), duplicate: false },
            }
        })
        .collect();
    Ok(GeneratedBatch { raw_response: raw.to_string(), molecules, request_fingerprint: request_fingerprint.to_string() })
}

/// Sends a generation prompt and parses the reply, retrying on timeouts and
/// replies without a JSON array.
pub fn generate_batch(generator: &Generator, prompt: &str) -> Result<GeneratedBatch, GenerationError> {
    let fp = request_fingerprint(prompt);
    generator.request(prompt, Task::Generate, &fp, |raw| parse_generation_response(raw, &fp))
}

fn parse_activity(raw: &str) -> Result<f64, GenerationError> {
    let obj = extract_json_object(raw, "activity").ok_or_else(|| GenerationError::MalformedResponse { raw: raw.into() })?;
    let v = &obj["activity"];
    let num = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    match num {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(GenerationError::NonNumericActivity { raw: raw.into(), value: v.to_string() }),
    }
}

/// Activity predicted in context: the backend sees the labeled examples and
/// the query and answers `{"activity": number}`.
pub fn icl_predict_activity(generator: &Generator, examples: &[(String, f64)], query: &str) -> Result<f64, GenerationError> {
    let prompt = build_prediction_prompt(examples, query)?;
    let fp = request_fingerprint(&prompt);
    generator.request(&prompt, Task::Predict, &fp, parse_activity)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModificationResult {
    /// Canonical input molecule.
    pub input: String,
    pub instruction: String,
    /// SMILES text the backend returned.
    pub raw_output: String,
    /// Canonical output when valid.
    pub output: Option<String>,
    pub valid: bool,
    pub error: Option<String>,
    pub before: PropertyProfile,
    pub after: Option<PropertyProfile>,
    /// `after - before` per property.
    pub deltas: Option<PropertyProfile>,
}

/// Applies a free-text instruction to one molecule through the backend and
/// reports the property changes. Invalid outputs come back with
/// `valid = false` and the reason, never as an error.
pub fn modify_molecule(
    generator: &Generator,
    molecule: &str,
    instruction: &str,
    context: &[PropertyExample],
    vocab: &FragmentVocabulary,
) -> Result<ModificationResult, GenerationError> {
    let mol = parse_smiles(molecule.trim())?;
    let input = to_canonical(&mol).into_string();
    let before = property_profile(&mol, vocab)?;
    let prompt = build_modification_prompt(&input, instruction, context);
    let fp = request_fingerprint(&prompt);
    let raw_output = generator.request(&prompt, Task::Modify, &fp, |raw| {
        let from_object = extract_json_object(raw, "smiles").and_then(|o| o["smiles"].as_str().map(str::to_string));
        let from_array = || {
            extract_json_array(raw)?
                .first()
                .and_then(|v| v.get("smiles").and_then(Value::as_str).map(str::to_string))
        };
        from_object.or_else(from_array).ok_or_else(|| GenerationError::MalformedResponse { raw: raw.into() })
    })?;
    let mut result = ModificationResult {
        input,
        instruction: instruction.to_string(),
        raw_output: raw_output.clone(),
        output: None,
        valid: false,
        error: None,
        before,
        after: None,
        deltas: None,
    };
    match parse_smiles(raw_output.trim()) {
        Err(e) => result.error = Some(e.to_string()),
        Ok(m) if !m.is_single_fragment() => result.error = Some("result has more than one fragment".into()),
        Ok(m) => match property_profile(&m, vocab) {
            Err(e) => result.error = Some(e.to_string()),
            Ok(after) => {
                result.output = Some(to_canonical(&m).into_string());
                result.valid = true;
                result.deltas = Some(before.delta_to(&after));
                result.after = Some(after);
            }
        },
    }
    Ok(result)
}
