//! Episode → entities → facts → validity intervals → invalidations.
//!
//! Every language-model decision sits behind [`Extractor`]. Implementations
//! receive all context explicitly and never touch graph state.

mod mock;
mod pipeline;

pub use mock::{MockExtractor, MockStage};
pub use pipeline::{IngestError, IngestReport, IngestStage};
pub(crate) use pipeline::{plan_ingest, validate_episode, Deps};

use serde::{Deserialize, Serialize};

use crate::graph::Episode;
use crate::ids::{EdgeId, NodeId};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractorError {
    #[error("extractor unreachable: {0}")]
    Unavailable(String),
    #[error("extractor returned malformed output: {0}")]
    Malformed(String),
    #[error("extractor failed: {0}")]
    Failed(String),
}

/// The current episode plus up to `n` preceding ones in ingestion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeContext {
    pub current: Episode,
    pub previous: Vec<Episode>,
}

impl EpisodeContext {
    pub fn previous_messages(&self) -> String {
        self.previous.iter().map(Episode::as_line).collect::<Vec<_>>().join("\n")
    }

    pub fn current_message(&self) -> String {
        self.current.as_line()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedEntity {
    pub name: String,
    pub summary: String,
}

/// Which extraction pass is running. The reflection pass sees the first
/// pass's output and returns only entities it missed.
#[derive(Debug, Clone, Copy)]
pub enum EntityPass<'a> {
    Initial,
    Reflection { found: &'a [ExtractedEntity] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityCandidate {
    pub id: NodeId,
    pub name: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EntityResolution {
    pub is_duplicate: bool,
    #[serde(default)]
    pub id: Option<NodeId>,
    /// Most complete full name for the merged node.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedFact {
    pub source: String,
    pub target: String,
    /// All-caps relation label, e.g. `WORKS_FOR`.
    pub predicate: String,
    pub fact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactCandidate {
    pub id: EdgeId,
    pub predicate: String,
    pub fact: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FactResolution {
    pub is_duplicate: bool,
    #[serde(default)]
    pub id: Option<EdgeId>,
}

/// Raw temporal output. Values are ISO 8601 strings and are validated by
/// the pipeline, not the extractor.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TemporalAnnotation {
    #[serde(default)]
    pub valid_at: Option<String>,
    #[serde(default)]
    pub invalid_at: Option<String>,
}

/// An edge as shown to the contradiction detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDescription {
    pub id: EdgeId,
    pub source: NodeId,
    pub source_name: String,
    pub target: NodeId,
    pub target_name: String,
    pub predicate: String,
    pub fact: String,
    #[serde(default)]
    pub valid_at: Option<Timestamp>,
    #[serde(default)]
    pub invalid_at: Option<Timestamp>,
}

pub trait Extractor: Send + Sync {
    fn extract_entities(&self, ctx: &EpisodeContext, pass: EntityPass<'_>) -> Result<Vec<ExtractedEntity>, ExtractorError>;

    fn resolve_entity(
        &self,
        ctx: &EpisodeContext,
        candidates: &[EntityCandidate],
        new: &ExtractedEntity,
    ) -> Result<EntityResolution, ExtractorError>;

    fn extract_facts(&self, ctx: &EpisodeContext, entities: &[ExtractedEntity]) -> Result<Vec<ExtractedFact>, ExtractorError>;

    fn resolve_fact(&self, existing: &[FactCandidate], new: &ExtractedFact) -> Result<FactResolution, ExtractorError>;

    fn extract_temporal(
        &self,
        ctx: &EpisodeContext,
        reference: Timestamp,
        fact: &ExtractedFact,
    ) -> Result<TemporalAnnotation, ExtractorError>;

    /// Ids from `related` that `new` contradicts.
    fn detect_contradictions(&self, new: &EdgeDescription, related: &[EdgeDescription]) -> Result<Vec<EdgeId>, ExtractorError>;

    fn summarize(&self, texts: &[String]) -> Result<String, ExtractorError>;

    /// Short key-term name for a community, derived from its summary.
    fn key_terms(&self, summary: &str) -> Result<String, ExtractorError>;
}
