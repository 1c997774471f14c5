//! Bi-temporal knowledge-graph memory for conversational agents.
//!
//! Episodes (messages, text, JSON) are turned into entities and facts by an
//! [`extraction::Extractor`]; facts carry both the time they held in the
//! world and the time the graph learned them. Retrieval runs hybrid search
//! (cosine, BM25, breadth-first), reranks, and renders a context block.
//!
//! ```
//! use tkg_core::{Episode, Graph, GraphConfig, Query, RerankConfig, Timestamp};
//!
//! let graph = Graph::in_memory(GraphConfig::default().with_dim(64));
//! let t = Timestamp::from_ymd(2024, 3, 1).unwrap();
//! graph.ingest(Episode::message("Alice", "I work at Acme Corp", t)).unwrap();
//! let out = graph.retrieve(&Query::new("Where does Alice work?"), &RerankConfig::default()).unwrap();
//! assert!(out.context.contains("Alice works at Acme Corp"));
//! ```

pub mod adapters;
pub mod community;
pub mod config;
pub mod context;
pub mod embedding;
mod engine;
pub mod extraction;
pub mod graph;
pub mod ids;
pub mod index;
pub mod rerank;
pub mod search;
pub mod synth;
pub mod text;
pub mod time;

pub use config::{CommunityConfig, GraphConfig};
pub use embedding::{Embedder, HashEmbedder};
pub use engine::{CommunityHit, EdgeHit, EntityHit, Graph, GraphBuilder, Retrieval, RetrieveError, StageTimings};
pub use extraction::{Extractor, IngestError, IngestReport, MockExtractor};
pub use graph::{CommunityNode, EntityNode, Episode, EpisodeKind, EpisodicEdge, GraphSnapshot, SemanticEdge, StoreError};
pub use ids::{CommunityId, EdgeId, EpisodeId, FactGroupId, IdGen, NodeId};
pub use rerank::{RerankConfig, RerankMethod};
pub use search::{Query, SearchMethod};
pub use time::{Clock, ManualClock, SystemClock, Timestamp};
