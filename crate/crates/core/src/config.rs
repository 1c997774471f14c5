use serde::{Deserialize, Serialize};

use crate::index::Bm25Params;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommunityConfig {
    pub max_iters: usize,
    /// Dynamic extensions tolerated before a full re-detection.
    pub staleness_threshold: u64,
    /// Member summaries per map-reduce leaf call.
    pub chunk_size: usize,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        CommunityConfig {
            max_iters: 100,
            staleness_threshold: 128,
            chunk_size: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    /// Embedding dimension shared by every vector in the graph.
    pub dim: usize,
    pub bm25: Bm25Params,
    /// Preceding episodes shown to the extractor.
    pub context_window: usize,
    /// Resolution candidates per search channel (cosine, full text).
    pub entity_candidates: usize,
    /// Incident edges shown to the contradiction detector.
    pub contradiction_candidates: usize,
    pub communities: CommunityConfig,
    /// Run `maybe_full_refresh` after every ingested episode.
    pub auto_refresh: bool,
    /// Seed for id generation; random ids when unset.
    pub id_seed: Option<u64>,
    /// fsync the store after every transaction.
    pub sync_writes: bool,
    /// Render a communities block in retrieved context.
    pub include_communities: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            dim: 1024,
            bm25: Bm25Params::default(),
            context_window: 4,
            entity_candidates: 5,
            contradiction_candidates: 10,
            communities: CommunityConfig::default(),
            auto_refresh: true,
            id_seed: None,
            sync_writes: false,
            include_communities: true,
        }
    }
}

impl GraphConfig {
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.id_seed = Some(seed);
        self
    }
}
