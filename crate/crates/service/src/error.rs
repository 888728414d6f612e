use leadopt::campaign::CampaignError;
use leadopt::data::DataError;
use leadopt::generation::GenerationError;
use leadopt::molgraph::SmilesError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{kind} '{id}' not found")]
    NotFound { kind: &'static str, id: String },
    #[error("dataset '{0}' is not registered")]
    DatasetMissing(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Validation(String),
    #[error("cannot parse molecule: {0}")]
    Parse(#[from] SmilesError),
    #[error("backend: {message}")]
    Backend { message: String, raw: Option<String> },
    #[error("{0}")]
    Internal(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound { .. } => "not_found",
            ServiceError::DatasetMissing(_) => "dataset_missing",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Validation(_) => "validation_error",
            ServiceError::Parse(_) => "parse_error",
            ServiceError::Backend { .. } => "backend_error",
            ServiceError::Internal(_) => "internal_error",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ServiceError::NotFound { .. } => 404,
            ServiceError::DatasetMissing(_) => 422,
            ServiceError::Conflict(_) => 409,
            ServiceError::Validation(_) => 400,
            ServiceError::Parse(_) => 422,
            ServiceError::Backend { .. } => 502,
            ServiceError::Internal(_) => 500,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let raw = match self {
            ServiceError::Backend { raw, .. } => raw.clone(),
            _ => None,
        };
        ErrorBody { error: ErrorDetail { code: self.code().into(), message: self.to_string(), raw } }
    }

    pub fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        ServiceError::NotFound { kind, id: id.into() }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for ServiceError {
    fn from(e: serde_json::Error) -> Self {
        ServiceError::Internal(format!("json: {e}"))
    }
}

impl From<GenerationError> for ServiceError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Parse(p) => ServiceError::Parse(p),
            GenerationError::Property(p) => ServiceError::Validation(p.to_string()),
            GenerationError::Config(c) => ServiceError::Validation(format!("backend configuration: {c}")),
            other => ServiceError::Backend { raw: other.raw_text().map(str::to_string), message: other.to_string() },
        }
    }
}

impl From<DataError> for ServiceError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(_) => ServiceError::Internal(e.to_string()),
            other => ServiceError::Validation(other.to_string()),
        }
    }
}

impl From<CampaignError> for ServiceError {
    fn from(e: CampaignError) -> Self {
        match e {
            CampaignError::InvalidConfig(_) | CampaignError::InvalidInput(_) | CampaignError::InsufficientData { .. } => {
                ServiceError::Validation(e.to_string())
            }
            CampaignError::Generation(g) => g.into(),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}
