//! The graph handle: single writer, snapshot readers, optional file store.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::community::{self, CommunityError};
use crate::config::GraphConfig;
use crate::context::{build_context, token_estimate, ContextOptions, FactLine};
use crate::embedding::{check_unit, Embedder, HashEmbedder};
use crate::extraction::{plan_ingest, Deps, Extractor, IngestError, IngestReport, MockExtractor};
use crate::graph::log::{self, LogWriter, Record};
use crate::graph::{
    CommunityNode, EntityNode, Episode, EpisodicEdge, GraphSnapshot, GraphState, SemanticEdge, StoreError, Txn,
};
use crate::ids::{CommunityId, EdgeId, EpisodeId, IdGen, NodeId};
use crate::rerank::{self, CrossEncoder, JaccardScorer, RerankConfig, RerankError, RerankMethod};
use crate::search::{self, CandidateSet, Query, SearchError, SearchMethod};
use crate::time::{Clock, SystemClock, Timestamp};

#[derive(Debug, thiserror::Error)]
pub enum RetrieveError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
}

/// Wall-clock milliseconds per retrieval stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub search_ms: f64,
    pub rerank_ms: f64,
    pub construct_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeHit {
    pub id: EdgeId,
    pub source: NodeId,
    pub target: NodeId,
    pub predicate: String,
    pub fact: String,
    pub t_created: Timestamp,
    pub t_expired: Option<Timestamp>,
    pub t_valid: Option<Timestamp>,
    pub t_invalid: Option<Timestamp>,
    pub episodes: Vec<EpisodeId>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityHit {
    pub id: NodeId,
    pub name: String,
    pub summary: String,
    pub community: Option<CommunityId>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityHit {
    pub id: CommunityId,
    pub name: String,
    pub summary: String,
    pub size: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub edges: Vec<EdgeHit>,
    pub entities: Vec<EntityHit>,
    pub communities: Vec<CommunityHit>,
    pub context: String,
    pub context_tokens: usize,
    /// The cross-encoder failed and fused order was used instead.
    pub rerank_fallback: bool,
    pub timings: StageTimings,
}

struct Writer {
    ids: IdGen,
    log: Option<LogWriter>,
}

/// A bi-temporal knowledge graph. Cheap to share across threads; writes are
/// serialized, reads work on snapshots.
pub struct Graph {
    config: GraphConfig,
    extractor: Arc<dyn Extractor>,
    embedder: Arc<dyn Embedder>,
    cross_encoder: Arc<dyn CrossEncoder>,
    clock: Arc<dyn Clock>,
    state: RwLock<Arc<GraphState>>,
    writer: Mutex<Writer>,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = self.state.read();
        f.debug_struct("Graph")
            .field("dim", &self.config.dim)
            .field("entities", &s.entity_count())
            .field("edges", &s.edge_count())
            .finish()
    }
}

pub struct GraphBuilder {
    config: GraphConfig,
    extractor: Option<Arc<dyn Extractor>>,
    embedder: Option<Arc<dyn Embedder>>,
    cross_encoder: Option<Arc<dyn CrossEncoder>>,
    clock: Option<Arc<dyn Clock>>,
}

impl GraphBuilder {
    pub fn extractor(mut self, e: Arc<dyn Extractor>) -> Self {
        self.extractor = Some(e);
        self
    }

    pub fn embedder(mut self, e: Arc<dyn Embedder>) -> Self {
        self.embedder = Some(e);
        self
    }

    pub fn cross_encoder(mut self, c: Arc<dyn CrossEncoder>) -> Self {
        self.cross_encoder = Some(c);
        self
    }

    pub fn clock(mut self, c: Arc<dyn Clock>) -> Self {
        self.clock = Some(c);
        self
    }

    fn finish(self, state: GraphState, log: Option<LogWriter>) -> Result<Graph, StoreError> {
        let dim = self.config.dim;
        let embedder = self.embedder.unwrap_or_else(|| Arc::new(HashEmbedder::new(dim)));
        if embedder.dim() != dim {
            return Err(StoreError::DimensionMismatch {
                found: embedder.dim(),
                expected: dim,
            });
        }
        // Offset seeded generators by the amount of stored content so a
        // reopened graph does not hand out ids it already used.
        let ids = match self.config.id_seed {
            Some(seed) => {
                let used = state.episode_count() + state.entity_count() + state.edge_count() + state.community_count();
                IdGen::seeded(seed.wrapping_add((used as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
            }
            None => IdGen::random(),
        };
        Ok(Graph {
            extractor: self.extractor.unwrap_or_else(|| Arc::new(MockExtractor::new())),
            embedder,
            cross_encoder: self.cross_encoder.unwrap_or_else(|| Arc::new(JaccardScorer)),
            clock: self.clock.unwrap_or_else(|| Arc::new(SystemClock)),
            state: RwLock::new(Arc::new(state)),
            writer: Mutex::new(Writer { ids, log }),
            config: self.config,
        })
    }

    /// A graph held only in memory.
    pub fn in_memory(self) -> Result<Graph, StoreError> {
        let state = GraphState::new(self.config.dim, self.config.bm25);
        self.finish(state, None)
    }

    /// Opens the store at `path`, creating it when missing. Every committed
    /// change is appended to the file.
    pub fn open(self, path: impl AsRef<Path>) -> Result<Graph, StoreError> {
        let path = path.as_ref();
        let state = if path.exists() {
            load_state(path, &self.config)?
        } else {
            log::write_file(path, self.config.dim, &[])?;
            GraphState::new(self.config.dim, self.config.bm25)
        };
        let log = LogWriter::open(path, self.config.sync_writes)?;
        self.finish(state, Some(log))
    }

    /// Loads a store image into memory without attaching to the file.
    pub fn load(self, path: impl AsRef<Path>) -> Result<Graph, StoreError> {
        let state = load_state(path.as_ref(), &self.config)?;
        self.finish(state, None)
    }
}

fn load_state(path: &Path, config: &GraphConfig) -> Result<GraphState, StoreError> {
    let (header, records) = log::read_file(path)?;
    if header.dim as usize != config.dim {
        return Err(StoreError::DimensionMismatch {
            found: header.dim as usize,
            expected: config.dim,
        });
    }
    let mut state = GraphState::new(config.dim, config.bm25);
    for r in records {
        state.apply(r);
    }
    Ok(state)
}

impl Graph {
    pub fn builder(config: GraphConfig) -> GraphBuilder {
        GraphBuilder {
            config,
            extractor: None,
            embedder: None,
            cross_encoder: None,
            clock: None,
        }
    }

    /// In-memory graph with the mock extractor and hashing embedder.
    pub fn in_memory(config: GraphConfig) -> Self {
        Self::builder(config).in_memory().expect("default embedder matches configured dimension")
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn extractor(&self) -> &dyn Extractor {
        self.extractor.as_ref()
    }

    pub fn store_path(&self) -> Option<PathBuf> {
        self.writer.lock().log.as_ref().map(|l| l.path().to_path_buf())
    }

    /// Read view that later writes do not affect.
    pub fn snapshot(&self) -> GraphSnapshot {
        GraphSnapshot(self.state.read().clone())
    }

    fn tick(&self) -> Timestamp {
        let high = self.state.read().meta().high_water;
        self.clock.now().max(high)
    }

    /// Appends and applies `records`. `held` is the caller's view of the
    /// state; it is released first so the update happens in place.
    fn commit(&self, w: &mut Writer, held: Arc<GraphState>, records: Vec<Record>) -> Result<(), StoreError> {
        drop(held);
        if let Some(log) = w.log.as_mut() {
            log.append(&records)?;
        }
        let mut guard = self.state.write();
        let state = Arc::make_mut(&mut guard);
        for r in records {
            state.apply(r);
        }
        Ok(())
    }

    fn with_meta(state: &GraphState, now: Timestamp) -> Record {
        let mut meta = state.meta().clone();
        meta.high_water = meta.high_water.max(now);
        Record::Meta(meta)
    }

    // ---- direct mutations ----------------------------------------------------

    /// Stores a raw episode without running extraction.
    pub fn add_episode(&self, mut ep: Episode) -> Result<EpisodeId, StoreError> {
        crate::extraction::validate_episode(&ep)?;
        let mut w = self.writer.lock();
        let state = self.state.read().clone();
        if state.episode(ep.id).is_some() {
            return Err(StoreError::DuplicateId(ep.id.to_string()));
        }
        let now = self.tick();
        ep.t_ingested = now;
        let id = ep.id;
        let meta = Self::with_meta(&state, now);
        self.commit(&mut w, state, vec![Record::Episode(ep), meta])?;
        Ok(id)
    }

    /// Inserts or replaces an entity by id.
    pub fn upsert_entity(&self, mut n: EntityNode) -> Result<NodeId, StoreError> {
        if n.name.trim().is_empty() {
            return Err(StoreError::EmptyName);
        }
        check_unit(&n.name_embedding, self.config.dim)?;
        let mut w = self.writer.lock();
        let state = self.state.read().clone();
        if n.community.is_none() {
            n.community = state.entity(n.id).and_then(|e| e.community);
        }
        if let Some(c) = n.community {
            let community = state.community(c).ok_or(StoreError::UnknownCommunity(c))?;
            if !community.members.contains(&n.id) {
                return Err(StoreError::UnknownCommunity(c));
            }
        }
        let id = n.id;
        self.commit(&mut w, state, vec![Record::Entity(n)])?;
        Ok(id)
    }

    /// Inserts or replaces a semantic edge by id. `t_valid` cannot change
    /// once set, and `t_invalid`/`t_expired` cannot be cleared.
    pub fn upsert_edge(&self, e: SemanticEdge) -> Result<EdgeId, StoreError> {
        if e.source == e.target {
            return Err(StoreError::SelfLoop(e.source));
        }
        if e.episodes.is_empty() {
            return Err(StoreError::NoProvenance);
        }
        if !e.intervals_ordered() {
            return Err(StoreError::IntervalOrder);
        }
        check_unit(&e.fact_embedding, self.config.dim)?;
        let mut w = self.writer.lock();
        let state = self.state.read().clone();
        for n in [e.source, e.target] {
            if state.entity(n).is_none() {
                return Err(StoreError::UnknownNode(n));
            }
        }
        for ep in &e.episodes {
            if state.episode(*ep).is_none() {
                return Err(StoreError::UnknownEpisode(*ep));
            }
        }
        if let Some(old) = state.edge(e.id) {
            if old.t_valid.is_some() && old.t_valid != e.t_valid {
                return Err(StoreError::ValidTimeRewrite(e.id));
            }
            if (old.t_invalid.is_some() && e.t_invalid.is_none()) || (old.t_expired.is_some() && e.t_expired.is_none()) {
                return Err(StoreError::InvalidationCleared(e.id));
            }
        }
        if let Some(g) = e.fact_group {
            if state.edges().any(|o| o.id != e.id && o.fact_group == Some(g) && o.fact != e.fact) {
                return Err(StoreError::FactGroupMismatch);
            }
        }
        let id = e.id;
        self.commit(&mut w, state, vec![Record::Edge(e)])?;
        Ok(id)
    }

    /// Links an episode to an entity. Linking the same pair again returns
    /// the existing link.
    pub fn link_episode(&self, ep: EpisodeId, n: NodeId) -> Result<EdgeId, StoreError> {
        let mut w = self.writer.lock();
        let state = self.state.read().clone();
        if state.episode(ep).is_none() {
            return Err(StoreError::UnknownEpisode(ep));
        }
        if state.entity(n).is_none() {
            return Err(StoreError::UnknownNode(n));
        }
        if let Some(id) = state.episodic_link(ep, n) {
            return Ok(id);
        }
        let id: EdgeId = w.ids.next();
        self.commit(&mut w, state, vec![Record::EpisodicEdge(EpisodicEdge { id, episode: ep, entity: n })])?;
        Ok(id)
    }

    pub fn edges_between(&self, a: NodeId, b: NodeId) -> Result<Vec<SemanticEdge>, StoreError> {
        let s = self.snapshot();
        let edges = s.edges_between(a, b)?.into_iter().cloned().collect();
        Ok(edges)
    }

    // ---- ingestion -------------------------------------------------------------

    /// Runs the extraction pipeline on `ep` and commits the result as one
    /// transaction. On error nothing is stored.
    pub fn ingest(&self, ep: Episode) -> Result<IngestReport, IngestError> {
        let report = {
            let mut w = self.writer.lock();
            let state = self.state.read().clone();
            let now = self.tick();
            let deps = Deps {
                extractor: self.extractor.as_ref(),
                embedder: self.embedder.as_ref(),
                config: &self.config,
            };
            let plan = plan_ingest(&state, ep, &deps, &mut w.ids, now)?;
            self.commit(&mut w, state, plan.records)?;
            plan.report
        };
        if self.config.auto_refresh {
            if let Err(e) = self.maybe_full_refresh() {
                tracing::warn!(error = %e, "community refresh failed");
            }
        }
        Ok(report)
    }

    // ---- communities ------------------------------------------------------------

    /// Assigns `n` to its neighbors' plurality community (or a new one).
    pub fn extend_with_node(&self, n: NodeId) -> Result<CommunityId, StoreError> {
        let mut w = self.writer.lock();
        let state = self.state.read().clone();
        let mut txn = Txn::new(&state);
        let id = community::extend_with_node(&mut txn, &mut w.ids, n)?;
        let records = txn.into_records();
        self.commit(&mut w, state, records)?;
        Ok(id)
    }

    /// Label propagation on the current snapshot, without storing anything.
    pub fn detect_communities(&self) -> Vec<BTreeSet<NodeId>> {
        community::detect_communities(&self.snapshot(), self.config.communities.max_iters)
    }

    /// Re-detects communities, rebuilds community nodes and resets the
    /// staleness counter. Returns the number of communities.
    pub fn refresh_communities(&self) -> Result<usize, CommunityError> {
        let mut w = self.writer.lock();
        let state = self.state.read().clone();
        let mut txn = Txn::new(&state);
        let count = community::full_refresh(
            &mut txn,
            &mut w.ids,
            self.extractor.as_ref(),
            self.embedder.as_ref(),
            &self.config.communities,
        )?;
        let records = txn.into_records();
        self.commit(&mut w, state, records)?;
        Ok(count)
    }

    /// Full refresh once enough dynamic extensions have accumulated.
    pub fn maybe_full_refresh(&self) -> Result<bool, CommunityError> {
        if self.state.read().meta().staleness < self.config.communities.staleness_threshold {
            return Ok(false);
        }
        self.refresh_communities()?;
        Ok(true)
    }

    /// Regenerates one community's summary and name. On failure the
    /// community is left as it was and stays dirty.
    pub fn refresh_summaries(&self, id: CommunityId) -> Result<CommunityNode, CommunityError> {
        let mut w = self.writer.lock();
        let state = self.state.read().clone();
        let mut c = state.community(id).cloned().ok_or(StoreError::UnknownCommunity(id))?;
        let (summary, name, name_embedding) = community::describe_members(
            &state,
            &c.members,
            self.extractor.as_ref(),
            self.embedder.as_ref(),
            self.config.communities.chunk_size,
        )?;
        c.summary = summary;
        c.name = name;
        c.name_embedding = name_embedding;
        let mut meta = state.meta().clone();
        meta.dirty.remove(&id);
        self.commit(&mut w, state, vec![Record::Community(c.clone()), Record::Meta(meta)])?;
        Ok(c)
    }

    /// Refreshes every dirty community; returns how many succeeded.
    pub fn refresh_dirty(&self) -> usize {
        let dirty: Vec<CommunityId> = self.state.read().meta().dirty.iter().copied().collect();
        dirty
            .into_iter()
            .filter(|id| match self.refresh_summaries(*id) {
                Ok(_) => true,
                Err(e) => {
                    tracing::warn!(community = %id, error = %e, "summary refresh failed");
                    false
                }
            })
            .count()
    }

    // ---- persistence --------------------------------------------------------------

    /// Writes a compacted image of the graph to `path`.
    pub fn persist(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let mut w = self.writer.lock();
        let state = self.state.read().clone();
        log::write_file(path, self.config.dim, &state.to_records())?;
        let attached = w.log.as_ref().is_some_and(|l| same_file(l.path(), path));
        if attached {
            w.log = Some(LogWriter::open(path, self.config.sync_writes)?);
        }
        Ok(())
    }

    // ---- retrieval ------------------------------------------------------------------

    /// Search, rerank and context construction on one snapshot.
    pub fn retrieve(&self, q: &Query, rerank_cfg: &RerankConfig) -> Result<Retrieval, RetrieveError> {
        if q.text.trim().is_empty() {
            return Err(RetrieveError::EmptyQuery);
        }
        let snapshot = self.snapshot();
        let state: &GraphState = &snapshot;
        let start = Instant::now();

        let needs_vector = q.methods.contains(&SearchMethod::Cosine) || rerank_cfg.method == RerankMethod::Mmr;
        let mut query = q.clone();
        if needs_vector && query.embedding.is_none() {
            query.embedding = Some(self.embedder.embed(&q.text).map_err(SearchError::from)?);
        }
        let candidates: CandidateSet = search::search(state, &query, self.embedder.as_ref())?;
        let searched = Instant::now();

        let reranked = rerank::rerank(
            state,
            &candidates,
            rerank_cfg,
            &query.text,
            query.embedding.as_deref(),
            self.cross_encoder.as_ref(),
            query.limit,
        )?;
        let reranked_at = Instant::now();

        let edges: Vec<&SemanticEdge> = reranked.edges.iter().filter_map(|s| state.edge(s.id)).collect();
        let entities: Vec<&EntityNode> = reranked.entities.iter().filter_map(|s| state.entity(s.id)).collect();
        let communities: Vec<&CommunityNode> = reranked.communities.iter().filter_map(|s| state.community(s.id)).collect();
        let context = build_context(
            edges.iter().map(|e| FactLine::from(*e)),
            &entities,
            &communities,
            ContextOptions {
                include_communities: self.config.include_communities,
            },
        );
        let done = Instant::now();

        let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
        let timings = StageTimings {
            search_ms: ms(start, searched),
            rerank_ms: ms(searched, reranked_at),
            construct_ms: ms(reranked_at, done),
            total_ms: ms(start, done),
        };
        Ok(Retrieval {
            edges: reranked
                .edges
                .iter()
                .zip(&edges)
                .map(|(s, e)| EdgeHit {
                    id: e.id,
                    source: e.source,
                    target: e.target,
                    predicate: e.predicate.clone(),
                    fact: e.fact.clone(),
                    t_created: e.t_created,
                    t_expired: e.t_expired,
                    t_valid: e.t_valid,
                    t_invalid: e.t_invalid,
                    episodes: e.episodes.clone(),
                    score: s.score,
                })
                .collect(),
            entities: reranked
                .entities
                .iter()
                .zip(&entities)
                .map(|(s, n)| EntityHit {
                    id: n.id,
                    name: n.name.clone(),
                    summary: n.summary.clone(),
                    community: n.community,
                    score: s.score,
                })
                .collect(),
            communities: reranked
                .communities
                .iter()
                .zip(&communities)
                .map(|(s, c)| CommunityHit {
                    id: c.id,
                    name: c.name.clone(),
                    summary: c.summary.clone(),
                    size: c.members.len(),
                    score: s.score,
                })
                .collect(),
            context_tokens: token_estimate(&context),
            context,
            rerank_fallback: reranked.fallback,
            timings,
        })
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}
