use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::log::Record;
use super::types::{CommunityNode, EntityNode, Episode, EpisodicEdge, SemanticEdge};
use super::StoreError;
use crate::ids::{CommunityId, EdgeId, EpisodeId, NodeId};
use crate::index::{Bm25Params, InvertedIndex, VectorIndex};
use crate::time::Timestamp;

/// Bookkeeping that is persisted alongside graph content.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    /// Dynamic community extensions since the last full detection run.
    pub staleness: u64,
    /// Communities whose summary no longer reflects their members.
    pub dirty: BTreeSet<CommunityId>,
    /// Latest `T'` instant handed out.
    pub high_water: Timestamp,
}

/// In-memory graph content plus every derived index. Mutated only through
/// [`GraphState::apply`], so index updates happen together with the change
/// they reflect.
#[derive(Debug, Clone)]
pub struct GraphState {
    dim: usize,
    episodes: BTreeMap<EpisodeId, Episode>,
    episode_order: Vec<EpisodeId>,
    entities: BTreeMap<NodeId, EntityNode>,
    edges: BTreeMap<EdgeId, SemanticEdge>,
    episodic: BTreeMap<EdgeId, EpisodicEdge>,
    communities: BTreeMap<CommunityId, CommunityNode>,

    incidence: HashMap<NodeId, BTreeSet<EdgeId>>,
    entity_episodes: HashMap<NodeId, BTreeSet<EpisodeId>>,
    episode_entities: HashMap<EpisodeId, BTreeSet<NodeId>>,
    episode_edges: HashMap<EpisodeId, BTreeSet<EdgeId>>,
    episodic_pairs: HashMap<(EpisodeId, NodeId), EdgeId>,

    name_text: InvertedIndex<NodeId>,
    entity_text: InvertedIndex<NodeId>,
    fact_text: InvertedIndex<EdgeId>,
    community_text: InvertedIndex<CommunityId>,
    name_vectors: VectorIndex<NodeId>,
    fact_vectors: VectorIndex<EdgeId>,
    community_vectors: VectorIndex<CommunityId>,

    meta: Meta,
}

impl GraphState {
    pub fn new(dim: usize, bm25: Bm25Params) -> Self {
        GraphState {
            dim,
            episodes: BTreeMap::new(),
            episode_order: Vec::new(),
            entities: BTreeMap::new(),
            edges: BTreeMap::new(),
            episodic: BTreeMap::new(),
            communities: BTreeMap::new(),
            incidence: HashMap::new(),
            entity_episodes: HashMap::new(),
            episode_entities: HashMap::new(),
            episode_edges: HashMap::new(),
            episodic_pairs: HashMap::new(),
            name_text: InvertedIndex::new(bm25),
            entity_text: InvertedIndex::new(bm25),
            fact_text: InvertedIndex::new(bm25),
            community_text: InvertedIndex::new(bm25),
            name_vectors: VectorIndex::new(dim),
            fact_vectors: VectorIndex::new(dim),
            community_vectors: VectorIndex::new(dim),
            meta: Meta::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&mut self, record: Record) {
        match record {
            Record::Episode(ep) => self.put_episode(ep),
            Record::Entity(n) => self.put_entity(n),
            Record::Edge(e) => self.put_edge(e),
            Record::EpisodicEdge(e) => self.put_episodic(e),
            Record::Community(c) => self.put_community(c),
            Record::RemoveCommunity(id) => self.remove_community(id),
            Record::Meta(m) => self.meta = m,
            Record::Header(_) | Record::Commit => {}
        }
    }

    fn put_episode(&mut self, ep: Episode) {
        if self.episodes.insert(ep.id, ep.clone()).is_none() {
            self.episode_order.push(ep.id);
        }
    }

    fn put_entity(&mut self, n: EntityNode) {
        self.name_text.insert(n.id, &n.name);
        self.entity_text.insert(n.id, &format!("{} {}", n.name, n.summary));
        self.name_vectors.upsert(n.id, &n.name_embedding);
        self.entities.insert(n.id, n);
    }

    fn put_edge(&mut self, e: SemanticEdge) {
        if let Some(old) = self.edges.get(&e.id) {
            for n in [old.source, old.target] {
                if let Some(set) = self.incidence.get_mut(&n) {
                    set.remove(&old.id);
                }
            }
            for ep in &old.episodes {
                if let Some(set) = self.episode_edges.get_mut(ep) {
                    set.remove(&old.id);
                }
            }
        }
        for n in [e.source, e.target] {
            self.incidence.entry(n).or_default().insert(e.id);
        }
        for ep in &e.episodes {
            self.episode_edges.entry(*ep).or_default().insert(e.id);
        }
        self.fact_text.insert(e.id, &e.fact);
        self.fact_vectors.upsert(e.id, &e.fact_embedding);
        self.edges.insert(e.id, e);
    }

    fn put_episodic(&mut self, e: EpisodicEdge) {
        self.entity_episodes.entry(e.entity).or_default().insert(e.episode);
        self.episode_entities.entry(e.episode).or_default().insert(e.entity);
        self.episodic_pairs.insert((e.episode, e.entity), e.id);
        self.episodic.insert(e.id, e);
    }

    fn put_community(&mut self, c: CommunityNode) {
        self.community_text.insert(c.id, &c.name);
        self.community_vectors.upsert(c.id, &c.name_embedding);
        self.communities.insert(c.id, c);
    }

    fn remove_community(&mut self, id: CommunityId) {
        if self.communities.remove(&id).is_some() {
            self.community_text.remove(id);
            self.community_vectors.remove(id);
        }
        self.meta.dirty.remove(&id);
    }

    // ---- reads -------------------------------------------------------------

    pub fn episode(&self, id: EpisodeId) -> Option<&Episode> {
        self.episodes.get(&id)
    }

    pub fn entity(&self, id: NodeId) -> Option<&EntityNode> {
        self.entities.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&SemanticEdge> {
        self.edges.get(&id)
    }

    pub fn episodic_edge(&self, id: EdgeId) -> Option<&EpisodicEdge> {
        self.episodic.get(&id)
    }

    pub fn community(&self, id: CommunityId) -> Option<&CommunityNode> {
        self.communities.get(&id)
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episode_order.iter().map(|id| &self.episodes[id])
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityNode> {
        self.entities.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &SemanticEdge> {
        self.edges.values()
    }

    pub fn episodic_edges(&self) -> impl Iterator<Item = &EpisodicEdge> {
        self.episodic.values()
    }

    pub fn communities(&self) -> impl Iterator<Item = &CommunityNode> {
        self.communities.values()
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn community_count(&self) -> usize {
        self.communities.len()
    }

    /// The last `n` episodes of `group` in ingestion order, oldest first.
    pub fn recent_episodes(&self, group: &str, n: usize) -> Vec<&Episode> {
        let mut out: Vec<&Episode> = self
            .episode_order
            .iter()
            .rev()
            .map(|id| &self.episodes[id])
            .filter(|ep| ep.group == group)
            .take(n)
            .collect();
        out.reverse();
        out
    }

    /// All semantic edges on the unordered pair `{a, b}`.
    pub fn edges_between(&self, a: NodeId, b: NodeId) -> Result<Vec<&SemanticEdge>, StoreError> {
        for n in [a, b] {
            if !self.entities.contains_key(&n) {
                return Err(StoreError::UnknownNode(n));
            }
        }
        Ok(self
            .incident_edge_ids(a)
            .filter_map(|id| self.edges.get(&id))
            .filter(|e| e.other(a) == Some(b))
            .collect())
    }

    pub fn incident_edge_ids(&self, n: NodeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.incidence.get(&n).into_iter().flatten().copied()
    }

    pub fn incident_edges(&self, n: NodeId) -> impl Iterator<Item = &SemanticEdge> {
        self.incident_edge_ids(n).filter_map(|id| self.edges.get(&id))
    }

    /// Distinct entity neighbors over semantic edges, in id order.
    pub fn neighbors(&self, n: NodeId) -> BTreeSet<NodeId> {
        self.incident_edges(n).filter_map(|e| e.other(n)).collect()
    }

    pub fn episodes_of(&self, n: NodeId) -> impl Iterator<Item = EpisodeId> + '_ {
        self.entity_episodes.get(&n).into_iter().flatten().copied()
    }

    pub fn entities_of(&self, ep: EpisodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.episode_entities.get(&ep).into_iter().flatten().copied()
    }

    /// Semantic edges citing `ep` as provenance.
    pub fn edges_of_episode(&self, ep: EpisodeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.episode_edges.get(&ep).into_iter().flatten().copied()
    }

    pub fn episodic_link(&self, ep: EpisodeId, n: NodeId) -> Option<EdgeId> {
        self.episodic_pairs.get(&(ep, n)).copied()
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn name_text(&self) -> &InvertedIndex<NodeId> {
        &self.name_text
    }

    pub fn entity_text(&self) -> &InvertedIndex<NodeId> {
        &self.entity_text
    }

    pub fn fact_text(&self) -> &InvertedIndex<EdgeId> {
        &self.fact_text
    }

    pub fn community_text(&self) -> &InvertedIndex<CommunityId> {
        &self.community_text
    }

    pub fn name_vectors(&self) -> &VectorIndex<NodeId> {
        &self.name_vectors
    }

    pub fn fact_vectors(&self) -> &VectorIndex<EdgeId> {
        &self.fact_vectors
    }

    pub fn community_vectors(&self) -> &VectorIndex<CommunityId> {
        &self.community_vectors
    }

    /// Records reproducing this state from scratch, in dependency order.
    pub fn to_records(&self) -> Vec<Record> {
        let mut out = Vec::with_capacity(
            self.episodes.len() + self.entities.len() + self.edges.len() + self.episodic.len() + self.communities.len() + 1,
        );
        out.extend(self.episodes().cloned().map(Record::Episode));
        out.extend(self.entities.values().cloned().map(Record::Entity));
        out.extend(self.communities.values().cloned().map(Record::Community));
        out.extend(self.edges.values().cloned().map(Record::Edge));
        out.extend(self.episodic.values().cloned().map(Record::EpisodicEdge));
        out.push(Record::Meta(self.meta.clone()));
        out
    }
}
