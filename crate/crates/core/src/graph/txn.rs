use std::collections::{BTreeMap, BTreeSet};

use super::log::Record;
use super::state::{GraphState, Meta};
use super::types::{CommunityNode, EntityNode, Episode, EpisodicEdge, SemanticEdge};
use crate::ids::{CommunityId, EdgeId, NodeId};

/// Pending changes layered over a read-only state. Reads see the overlay
/// first; nothing touches the base until the records are applied.
pub(crate) struct Txn<'a> {
    base: &'a GraphState,
    episode: Option<Episode>,
    entities: BTreeMap<NodeId, EntityNode>,
    entity_order: Vec<NodeId>,
    edges: BTreeMap<EdgeId, SemanticEdge>,
    edge_order: Vec<EdgeId>,
    incidence: BTreeMap<NodeId, BTreeSet<EdgeId>>,
    episodic: Vec<EpisodicEdge>,
    communities: BTreeMap<CommunityId, Option<CommunityNode>>,
    meta: Meta,
}

impl<'a> Txn<'a> {
    pub fn new(base: &'a GraphState) -> Self {
        Txn {
            base,
            episode: None,
            entities: BTreeMap::new(),
            entity_order: Vec::new(),
            edges: BTreeMap::new(),
            edge_order: Vec::new(),
            incidence: BTreeMap::new(),
            episodic: Vec::new(),
            communities: BTreeMap::new(),
            meta: base.meta().clone(),
        }
    }

    pub fn base(&self) -> &'a GraphState {
        self.base
    }

    pub fn set_episode(&mut self, ep: Episode) {
        self.episode = Some(ep);
    }

    pub fn entity(&self, id: NodeId) -> Option<&EntityNode> {
        self.entities.get(&id).or_else(|| self.base.entity(id))
    }

    pub fn edge(&self, id: EdgeId) -> Option<&SemanticEdge> {
        self.edges.get(&id).or_else(|| self.base.edge(id))
    }

    pub fn community(&self, id: CommunityId) -> Option<&CommunityNode> {
        match self.communities.get(&id) {
            Some(c) => c.as_ref(),
            None => self.base.community(id),
        }
    }

    /// Entities created or modified in this transaction, in first-touch order.
    pub fn touched_entities(&self) -> impl Iterator<Item = &EntityNode> {
        self.entity_order.iter().map(|id| &self.entities[id])
    }

    pub fn incident_edges(&self, n: NodeId) -> Vec<&SemanticEdge> {
        let mut ids: BTreeSet<EdgeId> = self.base.incident_edge_ids(n).collect();
        if let Some(extra) = self.incidence.get(&n) {
            ids.extend(extra);
        }
        ids.into_iter()
            .filter_map(|id| self.edge(id))
            .filter(|e| e.touches(n))
            .collect()
    }

    pub fn edges_between(&self, a: NodeId, b: NodeId) -> Vec<&SemanticEdge> {
        self.incident_edges(a)
            .into_iter()
            .filter(|e| e.other(a) == Some(b))
            .collect()
    }

    pub fn neighbors(&self, n: NodeId) -> BTreeSet<NodeId> {
        self.incident_edges(n).into_iter().filter_map(|e| e.other(n)).collect()
    }

    pub fn meta_mut(&mut self) -> &mut Meta {
        &mut self.meta
    }

    pub fn put_entity(&mut self, n: EntityNode) {
        if !self.entities.contains_key(&n.id) {
            self.entity_order.push(n.id);
        }
        self.entities.insert(n.id, n);
    }

    pub fn put_edge(&mut self, e: SemanticEdge) {
        if !self.edges.contains_key(&e.id) {
            self.edge_order.push(e.id);
        }
        for n in [e.source, e.target] {
            self.incidence.entry(n).or_default().insert(e.id);
        }
        self.edges.insert(e.id, e);
    }

    pub fn put_episodic(&mut self, e: EpisodicEdge) {
        self.episodic.push(e);
    }

    pub fn put_community(&mut self, c: CommunityNode) {
        self.communities.insert(c.id, Some(c));
    }

    pub fn remove_community(&mut self, id: CommunityId) {
        self.communities.insert(id, None);
        self.meta.dirty.remove(&id);
    }

    /// The transaction as log records, in an order that replays cleanly.
    pub fn into_records(self) -> Vec<Record> {
        let mut out = Vec::new();
        out.extend(self.episode.map(Record::Episode));
        let mut entities = self.entities;
        out.extend(self.entity_order.iter().filter_map(|id| entities.remove(id)).map(Record::Entity));
        for (id, c) in self.communities {
            out.push(match c {
                Some(c) => Record::Community(c),
                None => Record::RemoveCommunity(id),
            });
        }
        let mut edges = self.edges;
        out.extend(self.edge_order.iter().filter_map(|id| edges.remove(id)).map(Record::Edge));
        out.extend(self.episodic.into_iter().map(Record::EpisodicEdge));
        out.push(Record::Meta(self.meta));
        out
    }
}
