use std::path::Path;

use leadopt::campaign::CampaignConfig;
use leadopt::generation::GeneratorBackendConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const CONFIG_SCHEMA: &str = "leadopt-config";

/// The `--config` file. Every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub schema: String,
    pub version: u32,
    pub campaign: CampaignConfig,
    pub modify: ModifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModifyConfig {
    pub backend: GeneratorBackendConfig,
    /// Size of the synthetic corpus the SA-score vocabulary is built from
    /// when no vocabulary file exists in the data directory.
    pub vocab_corpus: usize,
}

impl Default for ModifyConfig {
    fn default() -> Self {
        ModifyConfig { backend: GeneratorBackendConfig::mock(0), vocab_corpus: 300 }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            schema: CONFIG_SCHEMA.into(),
            version: 1,
            campaign: CampaignConfig::default(),
            modify: ModifyConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ServiceConfig = toml::from_str(text).map_err(|e| ServiceError::Validation(format!("config: {e}")))?;
        if c.schema != CONFIG_SCHEMA || c.version != 1 {
            return Err(ServiceError::Validation(format!("config: unsupported format {} v{}", c.schema, c.version)));
        }
        c.campaign.validate()?;
        c.modify.backend.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Validation(format!("config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Replaces the campaign seed, and the mock backend seeds, with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.campaign.seed = seed;
        for b in [&mut self.campaign.backend, &mut self.modify.backend] {
            if let GeneratorBackendConfig::Mock { seed: s, .. } = b {
                *s = seed;
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = ServiceConfig::default().with_seed(7);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ServiceConfig::from_toml(&text).unwrap(), c);
        let partial = ServiceConfig::from_toml("[campaign]\nmax_iterations = 3\n").unwrap();
        assert_eq!(partial.campaign.max_iterations, 3);
        assert_eq!(partial.campaign.batch_size, CampaignConfig::default().batch_size);
        assert!(ServiceConfig::from_toml("[campaign]\ncutoff_percentile = 120.0\n").is_err());
        assert!(ServiceConfig::from_toml("schema = \"other\"\n").is_err());
    }
}
