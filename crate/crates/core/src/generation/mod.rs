//! Many-shot prompts, generator backends and response parsing.
//!
//! A [`Generator`] wraps one backend (a remote chat-completion service, the
//! seeded [`mock_generate`] mutator, or scripted responses for tests) together
//! with the retry policy and an optional JSON-lines audit log.

mod backend;
mod extract;
mod mock;
mod ops;
mod prompt;

use thiserror::Error;

use crate::molgraph::SmilesError;
use crate::properties::PropertyError;

pub use backend::{AuditLog, AuditRecord, Generator, GeneratorBackendConfig, RetryPolicy, ScriptRule, Task};
pub use extract::{extract_json_array, extract_json_object};
pub use mock::{mock_generate, MOCK_SUBSTITUENTS};
pub use ops::{
    generate_batch, icl_predict_activity, modify_molecule, parse_generation_response, request_fingerprint,
    GeneratedBatch, GeneratedMolecule, ModificationResult,
};
pub use prompt::{
    build_generation_prompt, build_modification_prompt, build_prediction_prompt, parse_example_line, ExampleOrder,
    Prompt, PromptExample, PromptSpec, PropertyExample, OUTPUT_SCHEMA_NOTE,
};

/// Attempts per request before giving up.
pub const DEFAULT_RETRIES: usize = 3;
pub const GENERATION_TEMPERATURE: f64 = 0.7;
pub const PREDICTION_TEMPERATURE: f64 = 0.0;

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("backend timed out after {attempts} attempt(s)")]
    BackendTimeout { attempts: usize },
    #[error("backend request failed: {0}")]
    Backend(String),
    #[error("response contains no usable JSON")]
    MalformedResponse { raw: String },
    #[error("activity field is not a number: {value}")]
    NonNumericActivity { raw: String, value: String },
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("invalid prompt: {0}")]
    InvalidSpec(String),
    #[error("molecule does not parse: {0}")]
    Parse(#[from] SmilesError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error("io: {0}")]
    Io(String),
}

impl GenerationError {
    /// Raw response text kept for audit, when the error carries one.
    pub fn raw_text(&self) -> Option<&str> {
        match self {
            GenerationError::MalformedResponse { raw } | GenerationError::NonNumericActivity { raw, .. } => Some(raw),
            _ => None,
        }
    }

    fn retryable(&self) -> bool {
        matches!(
            self,
            GenerationError::BackendTimeout { .. } | GenerationError::Backend(_) | GenerationError::MalformedResponse { .. }
        )
    }
}
