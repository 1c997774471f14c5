use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::{CommunityId, EdgeId, EpisodeId, FactGroupId, NodeId};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeKind {
    Message,
    Text,
    Json,
}

/// A raw ingested unit. Episodes are never modified after they are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: EpisodeId,
    pub kind: EpisodeKind,
    pub content: String,
    #[serde(default)]
    pub actor: Option<String>,
    /// When the message was sent; anchor for relative dates.
    pub t_ref: Timestamp,
    /// Position on the ingestion timeline, assigned by the graph.
    pub t_ingested: Timestamp,
    #[serde(default)]
    pub group: String,
}

impl Episode {
    pub fn new(kind: EpisodeKind, content: impl Into<String>, actor: Option<String>, t_ref: Timestamp) -> Self {
        Episode {
            id: EpisodeId::new_random(),
            kind,
            content: content.into(),
            actor,
            t_ref,
            t_ingested: Timestamp::from_millis(0),
            group: String::new(),
        }
    }

    pub fn message(actor: impl Into<String>, content: impl Into<String>, t_ref: Timestamp) -> Self {
        Self::new(EpisodeKind::Message, content, Some(actor.into()), t_ref)
    }

    pub fn text(content: impl Into<String>, t_ref: Timestamp) -> Self {
        Self::new(EpisodeKind::Text, content, None, t_ref)
    }

    pub fn with_id(mut self, id: EpisodeId) -> Self {
        self.id = id;
        self
    }

    /// Message episodes render as `actor: content`, the form extractors see.
    pub fn as_line(&self) -> String {
        match (&self.kind, &self.actor) {
            (EpisodeKind::Message, Some(actor)) => format!("{actor}: {}", self.content),
            _ => self.content.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityNode {
    pub id: NodeId,
    pub name: String,
    pub summary: String,
    pub name_embedding: Vec<f32>,
    #[serde(default)]
    pub community: Option<CommunityId>,
}

/// A fact between two entities, stamped on both timelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticEdge {
    pub id: EdgeId,
    pub source: NodeId,
    pub target: NodeId,
    pub predicate: String,
    pub fact: String,
    pub fact_embedding: Vec<f32>,
    #[serde(default)]
    pub fact_group: Option<FactGroupId>,
    pub t_created: Timestamp,
    #[serde(default)]
    pub t_expired: Option<Timestamp>,
    #[serde(default)]
    pub t_valid: Option<Timestamp>,
    #[serde(default)]
    pub t_invalid: Option<Timestamp>,
    pub episodes: Vec<EpisodeId>,
}

impl SemanticEdge {
    /// Half-open validity on `T`: `[t_valid, t_invalid)`, unbounded where unset.
    pub fn valid_at(&self, t: Timestamp) -> bool {
        valid_at(self.t_valid, self.t_invalid, t)
    }

    pub fn touches(&self, n: NodeId) -> bool {
        self.source == n || self.target == n
    }

    /// The endpoint pair with direction erased.
    pub fn pair(&self) -> (NodeId, NodeId) {
        unordered(self.source, self.target)
    }

    pub fn other(&self, n: NodeId) -> Option<NodeId> {
        if self.source == n {
            Some(self.target)
        } else if self.target == n {
            Some(self.source)
        } else {
            None
        }
    }

    pub fn intervals_ordered(&self) -> bool {
        let valid_ok = match (self.t_valid, self.t_invalid) {
            (Some(v), Some(i)) => v <= i,
            _ => true,
        };
        let txn_ok = self.t_expired.is_none_or(|e| self.t_created <= e);
        valid_ok && txn_ok
    }
}

pub fn valid_at(t_valid: Option<Timestamp>, t_invalid: Option<Timestamp>, t: Timestamp) -> bool {
    t_valid.is_none_or(|v| v <= t) && t_invalid.is_none_or(|i| t < i)
}

pub fn unordered(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodicEdge {
    pub id: EdgeId,
    pub episode: EpisodeId,
    pub entity: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityNode {
    pub id: CommunityId,
    /// Key terms drawn from the summary; this is the searchable field.
    pub name: String,
    pub summary: String,
    pub name_embedding: Vec<f32>,
    pub members: BTreeSet<NodeId>,
}
