//! Engine configuration. Every field has a default, so a config file only
//! needs the values it changes; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::HttpConfig;
use crate::error::{Error, Result};
use crate::report::{Policy, TEMPLATE_ARTICLE};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub store: PathBuf,
    pub graph: PathBuf,
    pub index: PathBuf,
    pub weights: PathBuf,
    pub lexicon: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            store: "store".into(),
            graph: "graph.json".into(),
            index: "index.json".into(),
            weights: "weights.json".into(),
            lexicon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkingConfig {
    pub max_chunk_tokens: usize,
    pub overlap_tokens: usize,
    pub window_tokens: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            max_chunk_tokens: crate::corpus::DEFAULT_MAX_CHUNK_TOKENS,
            overlap_tokens: crate::corpus::DEFAULT_OVERLAP_TOKENS,
            window_tokens: crate::kgraph::DEFAULT_WINDOW_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k: usize,
    pub depth: usize,
    pub k1: f64,
    pub b: f64,
    pub hop_discount: f64,
    pub expansion_cap: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: crate::report::DEFAULT_SECTION_K,
            depth: crate::report::DEFAULT_SECTION_DEPTH,
            k1: 1.2,
            b: 0.75,
            hop_discount: 0.5,
            expansion_cap: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub d: usize,
    pub patches: usize,
    pub classes: Vec<String>,
    pub seed: u64,
    pub embed_seed: u64,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        let t = crate::fusion::TrainConfig::default();
        Self {
            d: crate::fusion::DEFAULT_DIM,
            patches: crate::fusion::DEFAULT_PATCHES,
            classes: crate::fusion::class_labels(),
            seed: t.seed,
            embed_seed: t.embed_seed,
            lr: t.lr,
            epochs: t.epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub tau: f64,
    pub policy: Policy,
    pub template_id: String,
    pub differential_threshold: f64,
    /// Fixed date for the title block; `None` renders `\today`.
    pub date: Option<String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            tau: crate::report::DEFAULT_TAU,
            policy: Policy::Strict,
            template_id: TEMPLATE_ARTICLE.to_string(),
            differential_threshold: crate::report::DEFAULT_DIFFERENTIAL_THRESHOLD,
            date: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Template,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Falls back to `ORTHODOC_BACKEND_URL` when unset.
    pub url: Option<String>,
    pub model: String,
    pub max_in_flight: usize,
    pub deadline_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Template,
            url: None,
            model: "orthodoc-report".to_string(),
            max_in_flight: 4,
            deadline_secs: 60,
        }
    }
}

impl BackendConfig {
    pub fn http_config(&self) -> Result<HttpConfig> {
        let mut cfg = match &self.url {
            Some(url) => {
                let mut c = HttpConfig::new(url.clone());
                c.api_key = std::env::var(crate::backend::http::KEY_ENV).ok().filter(|k| !k.is_empty());
                c
            }
            None => HttpConfig::from_env().map_err(|e| Error::InvalidParameter(e.to_string()))?,
        };
        cfg.model = self.model.clone();
        cfg.max_in_flight = self.max_in_flight;
        cfg.deadline = std::time::Duration::from_secs(self.deadline_secs);
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub schema_version: u32,
    pub paths: PathsConfig,
    pub chunking: ChunkingConfig,
    pub retrieval: RetrievalConfig,
    pub fusion: FusionConfig,
    pub report: ReportConfig,
    pub backend: BackendConfig,
    /// Cap on concurrent section drafts.
    pub concurrency: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            paths: PathsConfig::default(),
            chunking: ChunkingConfig::default(),
            retrieval: RetrievalConfig::default(),
            fusion: FusionConfig::default(),
            report: ReportConfig::default(),
            backend: BackendConfig::default(),
            concurrency: 4,
        }
    }
}

impl EngineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: CONFIG_SCHEMA_VERSION,
                found: cfg.schema_version,
            });
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.chunking.overlap_tokens >= self.chunking.max_chunk_tokens {
            return bad("chunking.overlap_tokens must be below max_chunk_tokens".into());
        }
        if self.retrieval.k == 0 {
            return bad("retrieval.k must be at least 1".into());
        }
        if !(self.retrieval.k1 >= 0.0 && (0.0..=1.0).contains(&self.retrieval.b)) {
            return bad("retrieval.k1 must be >= 0 and retrieval.b in [0, 1]".into());
        }
        if !(self.report.tau > 0.0 && self.report.tau <= 1.0) {
            return bad(format!("report.tau {} must lie in (0, 1]", self.report.tau));
        }
        if self.fusion.d == 0 || self.fusion.classes.len() < 2 {
            return bad("fusion.d must be positive and fusion.classes hold at least two labels".into());
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        Ok(())
    }

    pub fn retrieval_params(&self) -> crate::retrieval::RetrievalParams {
        crate::retrieval::RetrievalParams {
            bm25: crate::retrieval::bm25::Bm25Params {
                k1: self.retrieval.k1,
                b: self.retrieval.b,
            },
            hop_discount: self.retrieval.hop_discount,
            expansion_cap: self.retrieval.expansion_cap,
        }
    }

    pub fn train_config(&self) -> crate::fusion::TrainConfig {
        crate::fusion::TrainConfig {
            lr: self.fusion.lr,
            epochs: self.fusion.epochs,
            seed: self.fusion.seed,
            d: self.fusion.d,
            embed_seed: self.fusion.embed_seed,
        }
    }
}
