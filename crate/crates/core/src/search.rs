//! Candidate generation: cosine similarity, BM25 and breadth-first search
//! over the three result types.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::embedding::{EmbedError, Embedder};
use crate::graph::GraphState;
use crate::ids::{CommunityId, EdgeId, EpisodeId, NodeId};
use crate::time::Timestamp;

pub const DEFAULT_LIMIT: usize = 20;
pub const DEFAULT_RECENT_EPISODES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    Cosine,
    Bm25,
    Bfs,
}

impl SearchMethod {
    pub const ALL: [SearchMethod; 3] = [SearchMethod::Cosine, SearchMethod::Bm25, SearchMethod::Bfs];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Query {
    pub text: String,
    /// Precomputed unit query vector; the embedder is used when absent.
    pub embedding: Option<Vec<f32>>,
    /// Per result type.
    pub limit: usize,
    /// Entity or episode ids to start breadth-first search from. An episode
    /// seeds the entities it mentions.
    pub seeds: Vec<Uuid>,
    /// Seed breadth-first search with the entities of the last this many
    /// episodes when no explicit seeds are given. `None` disables it.
    pub recent_episode_seeds: Option<usize>,
    pub bfs_depth: usize,
    /// Only return edges valid at this instant on `T`.
    pub as_of: Option<Timestamp>,
    pub methods: BTreeSet<SearchMethod>,
}

impl Default for Query {
    fn default() -> Self {
        Query {
            text: String::new(),
            embedding: None,
            limit: DEFAULT_LIMIT,
            seeds: Vec::new(),
            recent_episode_seeds: Some(DEFAULT_RECENT_EPISODES),
            bfs_depth: 2,
            as_of: None,
            methods: SearchMethod::ALL.into_iter().collect(),
        }
    }
}

impl Query {
    pub fn new(text: impl Into<String>) -> Self {
        Query {
            text: text.into(),
            ..Default::default()
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn with_methods(mut self, methods: impl IntoIterator<Item = SearchMethod>) -> Self {
        self.methods = methods.into_iter().collect();
        self
    }

    pub fn as_of(mut self, t: Timestamp) -> Self {
        self.as_of = Some(t);
        self
    }

    pub fn with_seeds(mut self, seeds: impl IntoIterator<Item = Uuid>) -> Self {
        self.seeds = seeds.into_iter().collect();
        self
    }

    pub fn with_embedding(mut self, v: Vec<f32>) -> Self {
        self.embedding = Some(v);
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("query limit must be at least 1")]
    ZeroLimit,
    #[error("no search method enabled")]
    NoMethods,
    #[error("query vector has dimension {got}, graph uses {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("unknown seed {0}")]
    UnknownSeed(Uuid),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored<I> {
    pub id: I,
    pub score: f64,
}

/// Ranked ids for each result type, best first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultLists {
    pub edges: Vec<Scored<EdgeId>>,
    pub entities: Vec<Scored<NodeId>>,
    pub communities: Vec<Scored<CommunityId>>,
}

/// Output of every enabled method, kept apart so rerankers can see
/// per-list ranks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub lists: BTreeMap<SearchMethod, ResultLists>,
}

impl CandidateSet {
    pub fn get(&self, m: SearchMethod) -> Option<&ResultLists> {
        self.lists.get(&m)
    }
}

/// Sorts by descending score, then ascending id.
pub fn rank<I: Ord + Copy>(mut items: Vec<Scored<I>>, limit: usize) -> Vec<Scored<I>> {
    items.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    items.truncate(limit);
    items
}

fn scored<I>((id, score): (I, f64)) -> Scored<I> {
    Scored { id, score }
}

fn scored32<I>((id, score): (I, f32)) -> Scored<I> {
    Scored { id, score: score as f64 }
}

fn edge_visible(state: &GraphState, id: EdgeId, as_of: Option<Timestamp>) -> bool {
    match as_of {
        None => true,
        Some(t) => state.edge(id).is_some_and(|e| e.valid_at(t)),
    }
}

pub fn search_cosine(state: &GraphState, query: &[f32], limit: usize, as_of: Option<Timestamp>) -> Result<ResultLists, SearchError> {
    if query.len() != state.dim() {
        return Err(SearchError::Dimension {
            expected: state.dim(),
            got: query.len(),
        });
    }
    Ok(ResultLists {
        edges: state
            .fact_vectors()
            .search_filtered(query, limit, |id| edge_visible(state, id, as_of))
            .into_iter()
            .map(scored32)
            .collect(),
        entities: state.name_vectors().search(query, limit).into_iter().map(scored32).collect(),
        communities: state.community_vectors().search(query, limit).into_iter().map(scored32).collect(),
    })
}

pub fn search_bm25(state: &GraphState, text: &str, limit: usize, as_of: Option<Timestamp>) -> ResultLists {
    let edges = match as_of {
        None => state.fact_text().search(text, limit),
        Some(_) => {
            let mut all = state.fact_text().search(text, usize::MAX);
            all.retain(|(id, _)| edge_visible(state, *id, as_of));
            all.truncate(limit);
            all
        }
    };
    ResultLists {
        edges: edges.into_iter().map(scored).collect(),
        entities: state.name_text().search(text, limit).into_iter().map(scored).collect(),
        communities: state.community_text().search(text, limit).into_iter().map(scored).collect(),
    }
}

/// Resolves seed ids to entities: entity ids stand for themselves, episode
/// ids for the entities the episode mentions.
pub fn resolve_seeds(state: &GraphState, seeds: &[Uuid]) -> Result<BTreeSet<NodeId>, SearchError> {
    let mut out = BTreeSet::new();
    for s in seeds {
        let node = NodeId(*s);
        let episode = EpisodeId(*s);
        if state.entity(node).is_some() {
            out.insert(node);
        } else if state.episode(episode).is_some() {
            out.extend(state.entities_of(episode));
        } else {
            return Err(SearchError::UnknownSeed(*s));
        }
    }
    Ok(out)
}

/// Entities linked to the last `r` episodes.
pub fn recent_seeds(state: &GraphState, r: usize) -> BTreeSet<NodeId> {
    let episodes: Vec<EpisodeId> = state.episodes().map(|e| e.id).collect();
    episodes.iter().rev().take(r).flat_map(|ep| state.entities_of(*ep)).collect()
}

/// Hop distances from `seeds` up to `depth`, walking semantic edges and
/// episode links (entity → episode → entity counts two hops).
pub fn bfs_distances(state: &GraphState, seeds: &BTreeSet<NodeId>, depth: usize) -> HashMap<NodeId, usize> {
    let mut dist: HashMap<NodeId, usize> = seeds.iter().map(|n| (*n, 0)).collect();
    let mut seen_episodes: HashSet<EpisodeId> = HashSet::new();
    // Episode links advance two hops at once, so frontiers are kept per level.
    let mut levels: Vec<Vec<NodeId>> = vec![Vec::new(); depth + 1];
    levels[0] = seeds.iter().copied().collect();
    for d in 0..depth {
        let frontier = std::mem::take(&mut levels[d]);
        for n in frontier {
            if dist[&n] != d {
                continue;
            }
            for m in state.neighbors(n) {
                if dist.get(&m).is_none_or(|old| *old > d + 1) {
                    dist.insert(m, d + 1);
                    levels[d + 1].push(m);
                }
            }
            if d + 2 > depth {
                continue;
            }
            for ep in state.episodes_of(n) {
                if !seen_episodes.insert(ep) {
                    continue;
                }
                for m in state.entities_of(ep) {
                    if dist.get(&m).is_none_or(|old| *old > d + 2) {
                        dist.insert(m, d + 2);
                        levels[d + 2].push(m);
                    }
                }
            }
        }
    }
    dist
}

/// Breadth-first search from `seeds`. Entities score `1/(1+hops)`; an edge
/// is one hop beyond its nearer endpoint and is returned when that is
/// within `depth`.
pub fn search_bfs(state: &GraphState, seeds: &BTreeSet<NodeId>, depth: usize, limit: usize, as_of: Option<Timestamp>) -> ResultLists {
    let dist = bfs_distances(state, seeds, depth);
    let score = |d: usize| 1.0 / (1.0 + d as f64);
    let entities: Vec<Scored<NodeId>> = dist.iter().map(|(n, d)| Scored { id: *n, score: score(*d) }).collect();
    let mut edge_dist: HashMap<EdgeId, usize> = HashMap::new();
    for (n, d) in &dist {
        if *d >= depth {
            continue;
        }
        for e in state.incident_edge_ids(*n) {
            let entry = edge_dist.entry(e).or_insert(d + 1);
            *entry = (*entry).min(d + 1);
        }
    }
    let edges: Vec<Scored<EdgeId>> = edge_dist
        .into_iter()
        .filter(|(id, _)| edge_visible(state, *id, as_of))
        .map(|(id, d)| Scored { id, score: score(d) })
        .collect();
    ResultLists {
        edges: rank(edges, limit),
        entities: rank(entities, limit),
        communities: Vec::new(),
    }
}

/// Runs every enabled method. The query vector is computed only when
/// cosine search needs it and none was supplied.
pub fn search(state: &GraphState, q: &Query, embedder: &dyn Embedder) -> Result<CandidateSet, SearchError> {
    if q.limit == 0 {
        return Err(SearchError::ZeroLimit);
    }
    if q.methods.is_empty() {
        return Err(SearchError::NoMethods);
    }
    let mut lists = BTreeMap::new();
    for m in &q.methods {
        let result = match m {
            SearchMethod::Cosine => {
                let owned;
                let v = match &q.embedding {
                    Some(v) => v.as_slice(),
                    None => {
                        owned = embedder.embed(&q.text)?;
                        owned.as_slice()
                    }
                };
                search_cosine(state, v, q.limit, q.as_of)?
            }
            SearchMethod::Bm25 => search_bm25(state, &q.text, q.limit, q.as_of),
            SearchMethod::Bfs => {
                let seeds = if !q.seeds.is_empty() {
                    resolve_seeds(state, &q.seeds)?
                } else if let Some(r) = q.recent_episode_seeds {
                    recent_seeds(state, r)
                } else {
                    BTreeSet::new()
                };
                search_bfs(state, &seeds, q.bfs_depth, q.limit, q.as_of)
            }
        };
        lists.insert(*m, result);
    }
    Ok(CandidateSet { lists })
}
