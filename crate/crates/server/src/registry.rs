//! Named graphs, each backed by its own store file and opened on first use.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::Mutex;
use tkg_core::adapters::{RemoteCrossEncoder, RemoteEmbedder, RemoteExtractor};
use tkg_core::{Graph, StoreError};

use crate::config::ServiceConfig;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("invalid graph name {0:?}: use 1-64 letters, digits, '-' or '_'")]
    BadName(String),
    #[error("cannot create data directory {path}: {source}")]
    DataDir { path: PathBuf, source: std::io::Error },
    #[error("graph {name}: {source}")]
    Store { name: String, source: StoreError },
}

pub fn valid_name(name: &str) -> bool {
    (1..=64).contains(&name.len()) && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub struct Registry {
    config: ServiceConfig,
    graphs: Mutex<HashMap<String, Arc<Graph>>>,
}

impl Registry {
    pub fn new(config: ServiceConfig) -> Self {
        Registry {
            config,
            graphs: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn path_of(&self, name: &str) -> PathBuf {
        self.config.data_dir.join(format!("{name}.tkg"))
    }

    /// An open or stored graph; `None` when it has never been created.
    pub fn get(&self, name: &str) -> Result<Option<Arc<Graph>>, RegistryError> {
        self.lookup(name, false)
    }

    pub fn get_or_create(&self, name: &str) -> Result<Arc<Graph>, RegistryError> {
        Ok(self.lookup(name, true)?.expect("created on demand"))
    }

    fn lookup(&self, name: &str, create: bool) -> Result<Option<Arc<Graph>>, RegistryError> {
        if !valid_name(name) {
            return Err(RegistryError::BadName(name.to_string()));
        }
        let mut graphs = self.graphs.lock();
        if let Some(g) = graphs.get(name) {
            return Ok(Some(g.clone()));
        }
        let path = self.path_of(name);
        if !path.exists() && !create {
            return Ok(None);
        }
        std::fs::create_dir_all(&self.config.data_dir).map_err(|source| RegistryError::DataDir {
            path: self.config.data_dir.clone(),
            source,
        })?;
        let graph = Arc::new(
            build_graph(&self.config)
                .open(&path)
                .map_err(|source| RegistryError::Store {
                    name: name.to_string(),
                    source,
                })?,
        );
        tracing::info!(graph = name, path = %path.display(), "graph opened");
        graphs.insert(name.to_string(), graph.clone());
        Ok(Some(graph))
    }
}

/// Graph builder wired to the configured adapters; built-in components are
/// used where no adapter URL is set.
pub fn build_graph(config: &ServiceConfig) -> tkg_core::GraphBuilder {
    let mut b = Graph::builder(config.graph.clone());
    if let Some(a) = &config.extractor {
        b = b.extractor(Arc::new(RemoteExtractor::new(a.clone())));
    }
    if let Some(a) = &config.embedder {
        b = b.embedder(Arc::new(RemoteEmbedder::new(a.clone(), config.graph.dim)));
    }
    if let Some(a) = &config.cross_encoder {
        b = b.cross_encoder(Arc::new(RemoteCrossEncoder::new(a.clone())));
    }
    b
}
