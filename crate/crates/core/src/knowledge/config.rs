use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::embed::{Embedder, HashEmbedder, RemoteEmbedder};
use super::metrics::{default_metric_catalog, MetricCatalog};
use super::KnowledgeError;

pub const KB_CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingProvider {
    Hash,
    Remote,
}

/// Contents of `kb/config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbConfig {
    pub config_version: u32,
    pub embedding_dim: usize,
    pub provider: EmbeddingProvider,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_model: Option<String>,
    /// Minimum component cosine for carrying an idea onto a near-matching
    /// configuration.
    pub transfer_threshold: f64,
    /// Maximum characters per infrastructure chunk.
    pub chunk_chars: usize,
    pub metrics: MetricCatalog,
}

impl Default for KbConfig {
    fn default() -> Self {
        Self {
            config_version: KB_CONFIG_VERSION,
            embedding_dim: 256,
            provider: EmbeddingProvider::Hash,
            remote_endpoint: None,
            remote_model: None,
            transfer_threshold: 0.8,
            chunk_chars: 480,
            metrics: default_metric_catalog(),
        }
    }
}

impl KbConfig {
    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        let text = std::fs::read_to_string(path).map_err(|e| KnowledgeError::Io(format!("{}: {e}", path.display())))?;
        let cfg: KbConfig = toml::from_str(&text).map_err(|e| KnowledgeError::Config(e.to_string()))?;
        if cfg.config_version != KB_CONFIG_VERSION {
            return Err(KnowledgeError::Config(format!(
                "unsupported config_version {}",
                cfg.config_version
            )));
        }
        if cfg.embedding_dim == 0 {
            return Err(KnowledgeError::Config("embedding_dim must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Builds the configured embedder. Remote endpoints fall back to the
    /// `ARDA_ENDPOINT` environment variable; the key comes from `ARDA_API_KEY`.
    pub fn embedder(&self) -> Result<Arc<dyn Embedder>, KnowledgeError> {
        match self.provider {
            EmbeddingProvider::Hash => Ok(Arc::new(HashEmbedder::new(self.embedding_dim))),
            EmbeddingProvider::Remote => {
                let endpoint = self
                    .remote_endpoint
                    .clone()
                    .or_else(|| std::env::var("ARDA_ENDPOINT").ok())
                    .ok_or_else(|| KnowledgeError::Config("remote embedding provider needs an endpoint".into()))?;
                let model = self.remote_model.clone().unwrap_or_else(|| "text-embedding-3-small".into());
                Ok(Arc::new(RemoteEmbedder::new(
                    &endpoint,
                    &model,
                    std::env::var("ARDA_API_KEY").ok(),
                    self.embedding_dim,
                    Duration::from_secs(60),
                )))
            }
        }
    }
}
