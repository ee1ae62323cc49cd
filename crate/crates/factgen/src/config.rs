//! Run configuration: a versioned TOML schema validated before any stage
//! executes. A serialized copy is stored with every run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.945;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {0}")]
    Unreadable(PathBuf),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config schema version {found}, expected {expected}")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    Mock,
    Replay,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Root directory for all artifacts (corpus/, datasets/, runs/, cache/).
    pub output_root: PathBuf,
    pub corpus_manifest: PathBuf,
    /// "token", "fact", or "both".
    pub mode: String,
    pub scales: Vec<u32>,
    pub backend: BackendChoice,
    #[serde(default = "default_gen_model")]
    pub gen_model_id: String,
    #[serde(default = "default_judge_model")]
    pub judge_model_id: String,
    #[serde(default = "default_embed_model")]
    pub embed_model_id: String,
    #[serde(default = "default_threshold")]
    pub coverage_threshold: f64,
    #[serde(default = "default_k")]
    pub retrieval_k: usize,
    /// Canonical arbitration seed for tie-breaking in concurrent stages.
    #[serde(default)]
    pub arbitration_seed: u64,
    /// Whitespace tokenizer when absent.
    #[serde(default)]
    pub bpe_vocab: Option<PathBuf>,
}

fn default_gen_model() -> String {
    // documented default from the experiment writeup; overridable
    "gpt-4-0613".to_string()
}
fn default_judge_model() -> String {
    "gpt-4-0613".to_string()
}
fn default_embed_model() -> String {
    "text-embedding-ada-002".to_string()
}
fn default_threshold() -> f64 {
    DEFAULT_COVERAGE_THRESHOLD
}
fn default_k() -> usize {
    crate::rag::DEFAULT_RETRIEVAL_K
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError::SchemaMismatch {
                found: self.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        if !matches!(self.mode.as_str(), "token" | "fact" | "both") {
            return Err(ConfigError::Invalid(format!(
                "mode must be token, fact, or both; got {:?}",
                self.mode
            )));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| ![1, 5, 10].contains(s)) {
            return Err(ConfigError::Invalid(
                "scales must be a non-empty subset of {1, 5, 10}".to_string(),
            ));
        }
        if !(0.0 < self.coverage_threshold && self.coverage_threshold <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "coverage_threshold must be in (0, 1]; got {}",
                self.coverage_threshold
            )));
        }
        if self.retrieval_k == 0 {
            return Err(ConfigError::Invalid("retrieval_k must be >= 1".to_string()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| ConfigError::Unreadable(path.to_path_buf()))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Store the validated copy beside a run's artifacts.
    pub fn store(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let text = toml::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text)
    }
}
