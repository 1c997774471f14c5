//! Three-tier graph storage: episodes, entities with their facts, and
//! communities.

pub mod log;
mod state;
mod txn;
mod types;

use std::ops::Deref;
use std::sync::Arc;

pub use state::{GraphState, Meta};
pub(crate) use txn::Txn;
pub use types::{unordered, valid_at, CommunityNode, EntityNode, Episode, EpisodeKind, EpisodicEdge, SemanticEdge};

use crate::embedding::EmbedError;
use crate::ids::{CommunityId, EdgeId, EpisodeId, NodeId};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("episode content is empty")]
    EmptyContent,
    #[error("message episodes require an actor")]
    MissingActor,
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("entity name is empty")]
    EmptyName,
    #[error("edge endpoints are the same node {0}")]
    SelfLoop(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("unknown episode {0}")]
    UnknownEpisode(EpisodeId),
    #[error("unknown community {0}")]
    UnknownCommunity(CommunityId),
    #[error("edge has no provenance episodes")]
    NoProvenance,
    #[error("edge timestamps out of order")]
    IntervalOrder,
    #[error("edges of one fact group must share fact text")]
    FactGroupMismatch,
    #[error("t_valid of edge {0} cannot change once set")]
    ValidTimeRewrite(EdgeId),
    #[error("t_invalid and t_expired of edge {0} cannot be cleared")]
    InvalidationCleared(EdgeId),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
    #[error("store format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt store: {0}")]
    CorruptStore(String),
    #[error("store dimension {found} does not match configured {expected}")]
    DimensionMismatch { found: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable read view of the graph at one `T'` instant. Later writes do not
/// affect it.
#[derive(Debug, Clone)]
pub struct GraphSnapshot(pub(crate) Arc<GraphState>);

impl Deref for GraphSnapshot {
    type Target = GraphState;

    fn deref(&self) -> &GraphState {
        &self.0
    }
}

impl GraphSnapshot {
    pub fn from_state(state: GraphState) -> Self {
        GraphSnapshot(Arc::new(state))
    }
}
