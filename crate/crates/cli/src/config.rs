use std::path::{Path, PathBuf};

use dkg_core::nn::ModelConfig;
use dkg_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

/// Overrides the `embeddings` entry of the config file.
pub const EMBEDDINGS_ENV: &str = "DKG_EMBEDDINGS";

/// Contents of a `--config` TOML file. Command-line flags win over it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Word vectors in fastText `.vec` text format. Without them a seeded
    /// random table is used.
    pub embeddings: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(env) = std::env::var_os(EMBEDDINGS_ENV).filter(|v| !v.is_empty()) {
            config.embeddings = Some(PathBuf::from(env));
        }
        Ok(config)
    }
}
