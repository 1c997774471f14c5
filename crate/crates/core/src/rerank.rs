//! Rerankers: reciprocal rank fusion, maximal marginal relevance, episode
//! mentions, node distance and cross-encoder scoring.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::embedding::dot;
use crate::graph::GraphState;
use crate::ids::{CommunityId, EdgeId, NodeId};
use crate::search::{CandidateSet, Scored};
use crate::text::tokenize;

pub const DEFAULT_RRF_K: f64 = 60.0;
pub const DEFAULT_MMR_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankMethod {
    #[default]
    Rrf,
    Mmr,
    EpisodeMentions,
    NodeDistance,
    CrossEncoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RerankConfig {
    pub method: RerankMethod,
    pub rrf_k: f64,
    pub mmr_lambda: f64,
    /// Required by `node_distance`.
    pub centroid: Option<NodeId>,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            method: RerankMethod::Rrf,
            rrf_k: DEFAULT_RRF_K,
            mmr_lambda: DEFAULT_MMR_LAMBDA,
            centroid: None,
        }
    }
}

impl RerankConfig {
    pub fn method(method: RerankMethod) -> Self {
        RerankConfig {
            method,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RerankError {
    #[error("node_distance reranking needs a centroid")]
    MissingCentroid,
    #[error("unknown centroid {0}")]
    UnknownCentroid(NodeId),
    #[error("mmr lambda {0} outside [0, 1]")]
    Lambda(f64),
    #[error("rrf k must be non-negative, got {0}")]
    RrfK(f64),
}

/// `score(id) = Σ 1/(k + rank)` over the lists containing `id`, ranks
/// counted from 1. Sorted by descending score, then id.
pub fn rrf<I: Ord + Copy + Hash>(lists: &[Vec<I>], k: f64) -> Vec<Scored<I>> {
    let mut scores: BTreeMap<I, f64> = BTreeMap::new();
    for list in lists {
        for (i, id) in list.iter().enumerate() {
            *scores.entry(*id).or_default() += 1.0 / (k + (i + 1) as f64);
        }
    }
    let mut out: Vec<Scored<I>> = scores.into_iter().map(|(id, score)| Scored { id, score }).collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    out
}

/// Greedy maximal marginal relevance. Each step picks the candidate
/// maximizing `λ·rel − (1−λ)·max cos(c, selected)`; the first pick is the
/// most relevant. Ties go to the earlier candidate. Candidates without an
/// embedding are dropped.
pub fn mmr<I: Copy + std::fmt::Debug>(candidates: &[(I, f64, Option<&[f32]>)], lambda: f64) -> Vec<I> {
    let mut pool: Vec<(usize, I, f64, &[f32])> = Vec::with_capacity(candidates.len());
    for (i, (id, rel, emb)) in candidates.iter().enumerate() {
        match emb {
            Some(v) => pool.push((i, *id, *rel, v)),
            None => tracing::warn!(?id, "candidate without embedding excluded from mmr"),
        }
    }
    let mut max_sim = vec![f64::NEG_INFINITY; pool.len()];
    let mut taken = vec![false; pool.len()];
    let mut out = Vec::with_capacity(pool.len());
    for _ in 0..pool.len() {
        let mut best: Option<(usize, f64)> = None;
        for (j, (_, _, rel, _)) in pool.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let score = if out.is_empty() {
                *rel
            } else {
                lambda * rel - (1.0 - lambda) * max_sim[j]
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        taken[j] = true;
        out.push(pool[j].1);
        let chosen = pool[j].3;
        for (m, (_, _, _, v)) in pool.iter().enumerate() {
            if !taken[m] {
                max_sim[m] = max_sim[m].max(dot(chosen, v) as f64);
            }
        }
    }
    out
}

/// Descending mention count, ties in input order.
pub fn episode_mentions<I: Copy>(candidates: &[(I, usize)]) -> Vec<I> {
    let mut v: Vec<(usize, I, usize)> = candidates.iter().enumerate().map(|(i, (id, c))| (i, *id, *c)).collect();
    v.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(_, id, _)| id).collect()
}

/// Ascending distance, unreachable (`None`) last, ties in input order.
pub fn node_distance<I: Copy>(candidates: &[(I, Option<usize>)]) -> Vec<I> {
    let mut v: Vec<(usize, I, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, (id, d))| (i, *id, d.unwrap_or(usize::MAX)))
        .collect();
    v.sort_by(|a, b| a.2.cmp(&b.2).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(_, id, _)| id).collect()
}

/// Unweighted shortest-path hop counts from `centroid` over semantic edges.
pub fn hop_distances(state: &GraphState, centroid: NodeId) -> HashMap<NodeId, usize> {
    let mut dist = HashMap::from([(centroid, 0)]);
    let mut queue = VecDeque::from([centroid]);
    while let Some(n) = queue.pop_front() {
        let d = dist[&n];
        for m in state.neighbors(n) {
            dist.entry(m).or_insert_with(|| {
                queue.push_back(m);
                d + 1
            });
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cross-encoder failed: {0}")]
pub struct CrossEncoderError(pub String);

/// Relevance scorer over (query, candidate text) pairs.
pub trait CrossEncoder: Send + Sync {
    fn score(&self, query: &str, texts: &[String]) -> Result<Vec<f64>, CrossEncoderError>;
}

/// Jaccard overlap of the token sets of query and candidate.
#[derive(Debug, Default, Clone, Copy)]
pub struct JaccardScorer;

pub fn jaccard(a: &str, b: &str) -> f64 {
    let a: std::collections::BTreeSet<String> = tokenize(a).into_iter().collect();
    let b: std::collections::BTreeSet<String> = tokenize(b).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

impl CrossEncoder for JaccardScorer {
    fn score(&self, query: &str, texts: &[String]) -> Result<Vec<f64>, CrossEncoderError> {
        Ok(texts.iter().map(|t| jaccard(query, t)).collect())
    }
}

/// Scores candidates with `scorer`, best first, ties in input order. On
/// scorer failure (or a wrong-length answer) the input order is kept and
/// the second value is `true`.
pub fn cross_encode<I: Copy>(scorer: &dyn CrossEncoder, query: &str, candidates: &[(I, String)]) -> (Vec<Scored<I>>, bool) {
    let texts: Vec<String> = candidates.iter().map(|(_, t)| t.clone()).collect();
    match scorer.score(query, &texts) {
        Ok(scores) if scores.len() == candidates.len() => {
            let mut v: Vec<(usize, Scored<I>)> = candidates
                .iter()
                .zip(scores)
                .enumerate()
                .map(|(i, ((id, _), score))| (i, Scored { id: *id, score }))
                .collect();
            v.sort_by(|a, b| b.1.score.total_cmp(&a.1.score).then(a.0.cmp(&b.0)));
            (v.into_iter().map(|(_, s)| s).collect(), false)
        }
        other => {
            if let Err(e) = other {
                tracing::warn!(error = %e, "cross-encoder unavailable; keeping fused order");
            } else {
                tracing::warn!("cross-encoder returned the wrong number of scores; keeping fused order");
            }
            let n = candidates.len();
            let fallback = candidates
                .iter()
                .enumerate()
                .map(|(i, (id, _))| Scored {
                    id: *id,
                    score: (n - i) as f64,
                })
                .collect();
            (fallback, true)
        }
    }
}

/// Reranked results per type, best first, truncated to the query limit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reranked {
    pub edges: Vec<Scored<EdgeId>>,
    pub entities: Vec<Scored<NodeId>>,
    pub communities: Vec<Scored<CommunityId>>,
    /// The cross-encoder failed and fused order was kept.
    pub fallback: bool,
}

/// Views of stored items needed by the rerankers of one result type.
trait Item: Copy + Ord + Hash + std::fmt::Debug {
    fn embedding(self, state: &GraphState) -> Option<&[f32]>;
    fn mentions(self, state: &GraphState) -> usize;
    fn distance(self, state: &GraphState, hops: &HashMap<NodeId, usize>) -> Option<usize>;
    fn text(self, state: &GraphState) -> String;
}

impl Item for EdgeId {
    fn embedding(self, state: &GraphState) -> Option<&[f32]> {
        state.edge(self).map(|e| e.fact_embedding.as_slice())
    }

    fn mentions(self, state: &GraphState) -> usize {
        state.edge(self).map_or(0, |e| e.episodes.len())
    }

    fn distance(self, state: &GraphState, hops: &HashMap<NodeId, usize>) -> Option<usize> {
        let e = state.edge(self)?;
        let a = hops.get(&e.source).copied();
        let b = hops.get(&e.target).copied();
        a.into_iter().chain(b).min()
    }

    fn text(self, state: &GraphState) -> String {
        state.edge(self).map(|e| e.fact.clone()).unwrap_or_default()
    }
}

impl Item for NodeId {
    fn embedding(self, state: &GraphState) -> Option<&[f32]> {
        state.entity(self).map(|e| e.name_embedding.as_slice())
    }

    fn mentions(self, state: &GraphState) -> usize {
        state.episodes_of(self).count()
    }

    fn distance(self, _state: &GraphState, hops: &HashMap<NodeId, usize>) -> Option<usize> {
        hops.get(&self).copied()
    }

    fn text(self, state: &GraphState) -> String {
        state.entity(self).map(|e| format!("{} {}", e.name, e.summary)).unwrap_or_default()
    }
}

impl Item for CommunityId {
    fn embedding(self, state: &GraphState) -> Option<&[f32]> {
        state.community(self).map(|c| c.name_embedding.as_slice())
    }

    fn mentions(self, state: &GraphState) -> usize {
        state
            .community(self)
            .map_or(0, |c| c.members.iter().map(|m| state.episodes_of(*m).count()).sum())
    }

    fn distance(self, state: &GraphState, hops: &HashMap<NodeId, usize>) -> Option<usize> {
        let c = state.community(self)?;
        c.members.iter().filter_map(|m| hops.get(m).copied()).min()
    }

    fn text(self, state: &GraphState) -> String {
        state.community(self).map(|c| format!("{} {}", c.name, c.summary)).unwrap_or_default()
    }
}

struct Ctx<'a> {
    state: &'a GraphState,
    cfg: &'a RerankConfig,
    query_text: &'a str,
    query_embedding: Option<&'a [f32]>,
    hops: Option<HashMap<NodeId, usize>>,
    cross_encoder: &'a dyn CrossEncoder,
    fallback: bool,
}

impl Ctx<'_> {
    fn apply<I: Item>(&mut self, lists: Vec<Vec<I>>, limit: usize) -> Vec<Scored<I>> {
        let fused = rrf(&lists, self.cfg.rrf_k);
        let state = self.state;
        let out = match self.cfg.method {
            RerankMethod::Rrf => fused,
            RerankMethod::Mmr => {
                let candidates: Vec<(I, f64, Option<&[f32]>)> = fused
                    .iter()
                    .map(|s| {
                        let emb = s.id.embedding(state);
                        let rel = match (self.query_embedding, emb) {
                            (Some(q), Some(e)) => dot(q, e) as f64,
                            _ => 0.0,
                        };
                        (s.id, rel, emb)
                    })
                    .collect();
                positional(mmr(&candidates, self.cfg.mmr_lambda))
            }
            RerankMethod::EpisodeMentions => {
                let c: Vec<(I, usize)> = fused.iter().map(|s| (s.id, s.id.mentions(state))).collect();
                let counts: HashMap<I, usize> = c.iter().copied().collect();
                episode_mentions(&c)
                    .into_iter()
                    .map(|id| Scored {
                        id,
                        score: counts[&id] as f64,
                    })
                    .collect()
            }
            RerankMethod::NodeDistance => {
                let hops = self.hops.as_ref().expect("centroid checked before reranking");
                let c: Vec<(I, Option<usize>)> = fused.iter().map(|s| (s.id, s.id.distance(state, hops))).collect();
                let d: HashMap<I, Option<usize>> = c.iter().copied().collect();
                node_distance(&c)
                    .into_iter()
                    .map(|id| Scored {
                        id,
                        score: d[&id].map_or(0.0, |d| 1.0 / (1.0 + d as f64)),
                    })
                    .collect()
            }
            RerankMethod::CrossEncoder => {
                let c: Vec<(I, String)> = fused.iter().map(|s| (s.id, s.id.text(state))).collect();
                let (ranked, fallback) = cross_encode(self.cross_encoder, self.query_text, &c);
                self.fallback |= fallback;
                ranked
            }
        };
        let mut out = out;
        out.truncate(limit);
        out
    }
}

fn positional<I>(ids: Vec<I>) -> Vec<Scored<I>> {
    let n = ids.len();
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| Scored {
            id,
            score: (n - i) as f64,
        })
        .collect()
}

/// Fuses each result type's per-method lists with RRF, then applies the
/// configured reranker to the fused list. Types are reranked independently.
pub fn rerank(
    state: &GraphState,
    candidates: &CandidateSet,
    cfg: &RerankConfig,
    query_text: &str,
    query_embedding: Option<&[f32]>,
    cross_encoder: &dyn CrossEncoder,
    limit: usize,
) -> Result<Reranked, RerankError> {
    if !(0.0..=1.0).contains(&cfg.mmr_lambda) {
        return Err(RerankError::Lambda(cfg.mmr_lambda));
    }
    if !(cfg.rrf_k >= 0.0) {
        return Err(RerankError::RrfK(cfg.rrf_k));
    }
    let hops = match cfg.method {
        RerankMethod::NodeDistance => {
            let c = cfg.centroid.ok_or(RerankError::MissingCentroid)?;
            if state.entity(c).is_none() {
                return Err(RerankError::UnknownCentroid(c));
            }
            Some(hop_distances(state, c))
        }
        _ => None,
    };
    let mut ctx = Ctx {
        state,
        cfg,
        query_text,
        query_embedding,
        hops,
        cross_encoder,
        fallback: false,
    };
    let lists = candidates.lists.values();
    let edges = ctx.apply(lists.clone().map(|l| l.edges.iter().map(|s| s.id).collect()).collect(), limit);
    let entities = ctx.apply(lists.clone().map(|l| l.entities.iter().map(|s| s.id).collect()).collect(), limit);
    let communities = ctx.apply(lists.map(|l| l.communities.iter().map(|s| s.id).collect()).collect(), limit);
    Ok(Reranked {
        edges,
        entities,
        communities,
        fallback: ctx.fallback,
    })
}
