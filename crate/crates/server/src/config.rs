//! Service configuration: built-in defaults, then an optional TOML file,
//! then `TKG_*` environment variables.
//!
//! ```toml
//! listen = "127.0.0.1:7700"
//! data_dir = "./data"
//!
//! [graph]            # engine settings shared by every graph
//! dim = 1024
//! context_window = 4
//!
//! [graph.communities]
//! staleness_threshold = 128
//!
//! [extractor]        # omit to use the built-in rule-based extractor
//! url = "http://localhost:9000"
//! timeout_ms = 30000
//! retries = 2
//!
//! [embedder]         # omit to use feature hashing
//! url = "http://localhost:9001"
//!
//! [cross_encoder]    # omit to use token overlap
//! url = "http://localhost:9002"
//!
//! [search]
//! limit = 20
//! bfs_depth = 2
//! recent_episodes = 2
//!
//! [search.rerank]
//! method = "rrf"     # rrf | mmr | episode_mentions | node_distance | cross_encoder
//! rrf_k = 60.0
//! mmr_lambda = 0.5
//! ```
//!
//! Environment overrides: `TKG_LISTEN`, `TKG_DATA_DIR`, `TKG_DIM`,
//! `TKG_EXTRACTOR_URL`, `TKG_EXTRACTOR_TIMEOUT_MS`, `TKG_EMBEDDER_URL`,
//! `TKG_CROSS_ENCODER_URL`, `TKG_SEARCH_LIMIT`, `TKG_BFS_DEPTH`,
//! `TKG_RECENT_EPISODES`, `TKG_RERANK`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tkg_core::adapters::AdapterConfig;
use tkg_core::search::{DEFAULT_LIMIT, DEFAULT_RECENT_EPISODES};
use tkg_core::{GraphConfig, Query, RerankConfig, RerankMethod};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("environment variable {name}={value:?}: {reason}")]
    Env { name: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchDefaults {
    pub limit: usize,
    pub bfs_depth: usize,
    /// Episodes whose entities seed breadth-first search; 0 disables.
    pub recent_episodes: usize,
    pub rerank: RerankConfig,
}

impl Default for SearchDefaults {
    fn default() -> Self {
        SearchDefaults {
            limit: DEFAULT_LIMIT,
            bfs_depth: 2,
            recent_episodes: DEFAULT_RECENT_EPISODES,
            rerank: RerankConfig::default(),
        }
    }
}

impl SearchDefaults {
    pub fn query(&self, text: impl Into<String>) -> Query {
        let mut q = Query::new(text).with_limit(self.limit);
        q.bfs_depth = self.bfs_depth;
        q.recent_episode_seeds = (self.recent_episodes > 0).then_some(self.recent_episodes);
        q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    /// One store file per graph, `<data_dir>/<graph>.tkg`.
    pub data_dir: PathBuf,
    pub graph: GraphConfig,
    pub extractor: Option<AdapterConfig>,
    pub embedder: Option<AdapterConfig>,
    pub cross_encoder: Option<AdapterConfig>,
    pub search: SearchDefaults,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:7700".into(),
            data_dir: PathBuf::from("data"),
            graph: GraphConfig::default(),
            extractor: None,
            embedder: None,
            cross_encoder: None,
            search: SearchDefaults::default(),
        }
    }
}

impl ServiceConfig {
    /// Defaults, overlaid by `file` when given, then by the environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(path) => Self::from_file(path)?,
            None => ServiceConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Applies `TKG_*` overrides read through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parsed<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.trim().parse().map_err(|e: T::Err| ConfigError::Env {
                name: name.into(),
                value: value.into(),
                reason: e.to_string(),
            })
        }
        let adapter = |slot: &mut Option<AdapterConfig>, url: String| match slot {
            Some(a) => a.url = url,
            None => *slot = Some(AdapterConfig::new(url)),
        };
        if let Some(v) = get("TKG_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = get("TKG_DATA_DIR") {
            self.data_dir = PathBuf::from(v);
        }
        if let Some(v) = get("TKG_DIM") {
            self.graph.dim = parsed("TKG_DIM", &v)?;
        }
        if let Some(v) = get("TKG_EXTRACTOR_URL") {
            adapter(&mut self.extractor, v);
        }
        if let Some(v) = get("TKG_EXTRACTOR_TIMEOUT_MS") {
            let ms = parsed("TKG_EXTRACTOR_TIMEOUT_MS", &v)?;
            match &mut self.extractor {
                Some(a) => a.timeout_ms = ms,
                None => {
                    return Err(ConfigError::Env {
                        name: "TKG_EXTRACTOR_TIMEOUT_MS".into(),
                        value: v,
                        reason: "no extractor URL configured".into(),
                    })
                }
            }
        }
        if let Some(v) = get("TKG_EMBEDDER_URL") {
            adapter(&mut self.embedder, v);
        }
        if let Some(v) = get("TKG_CROSS_ENCODER_URL") {
            adapter(&mut self.cross_encoder, v);
        }
        if let Some(v) = get("TKG_SEARCH_LIMIT") {
            self.search.limit = parsed("TKG_SEARCH_LIMIT", &v)?;
        }
        if let Some(v) = get("TKG_BFS_DEPTH") {
            self.search.bfs_depth = parsed("TKG_BFS_DEPTH", &v)?;
        }
        if let Some(v) = get("TKG_RECENT_EPISODES") {
            self.search.recent_episodes = parsed("TKG_RECENT_EPISODES", &v)?;
        }
        if let Some(v) = get("TKG_RERANK") {
            self.search.rerank.method =
                serde_json::from_value::<RerankMethod>(serde_json::Value::String(v.trim().to_string())).map_err(|e| {
                    ConfigError::Env {
                        name: "TKG_RERANK".into(),
                        value: v.clone(),
                        reason: e.to_string(),
                    }
                })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.listen.parse::<SocketAddr>().is_err() {
            return bad(format!("listen address {:?} is not host:port", self.listen));
        }
        if self.graph.dim == 0 {
            return bad("graph.dim must be positive".into());
        }
        if self.search.limit == 0 {
            return bad("search.limit must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.search.rerank.mmr_lambda) {
            return bad("search.rerank.mmr_lambda must lie in [0, 1]".into());
        }
        if !(self.search.rerank.rrf_k >= 0.0) {
            return bad("search.rerank.rrf_k must be non-negative".into());
        }
        if self.search.rerank.method == RerankMethod::NodeDistance {
            return bad("node_distance needs a per-request centroid and cannot be the default".into());
        }
        for (name, a) in [
            ("extractor", &self.extractor),
            ("embedder", &self.embedder),
            ("cross_encoder", &self.cross_encoder),
        ] {
            if let Some(a) = a {
                if !(a.url.starts_with("http://") || a.url.starts_with("https://")) {
                    return bad(format!("{name}.url {:?} is not an http(s) URL", a.url));
                }
                if a.timeout_ms == 0 {
                    return bad(format!("{name}.timeout_ms must be positive"));
                }
            }
        }
        Ok(())
    }
}
