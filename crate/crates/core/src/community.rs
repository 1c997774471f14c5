//! Community detection by synchronous label propagation, incremental
//! extension of new nodes, and map-reduce community summaries.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::CommunityConfig;
use crate::embedding::{EmbedError, Embedder};
use crate::extraction::{Extractor, ExtractorError};
use crate::graph::{CommunityNode, GraphState, StoreError, Txn};
use crate::ids::{CommunityId, IdGen, NodeId};

#[derive(Debug, thiserror::Error)]
pub enum CommunityError {
    #[error(transparent)]
    Extractor(#[from] ExtractorError),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Runs synchronous label propagation over an undirected graph given as
/// sorted adjacency lists of node indices. Every node starts with its own
/// index as label and adopts the most frequent label among its neighbors
/// and itself, the smallest label on ties. Counting the node's own label
/// keeps the result independent of how nodes are numbered (without it a
/// bridge node can drag one clique of a barbell into the other).
///
/// If the labels ever repeat those of two rounds ago the run stops and
/// every node takes the smaller of its two alternating labels.
pub fn label_propagation(adjacency: &[Vec<usize>], max_iters: usize) -> Vec<usize> {
    let n = adjacency.len();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut previous: Option<Vec<usize>> = None;
    let mut scratch = Vec::new();
    for _ in 0..max_iters {
        let next: Vec<usize> = (0..n)
            .map(|i| {
                scratch.clear();
                scratch.extend(adjacency[i].iter().map(|&j| labels[j]));
                scratch.push(labels[i]);
                plurality(&mut scratch).unwrap_or(labels[i])
            })
            .collect();
        if next == labels {
            break;
        }
        if previous.as_ref() == Some(&next) {
            labels = labels.iter().zip(&next).map(|(a, b)| *a.min(b)).collect();
            break;
        }
        previous = Some(std::mem::replace(&mut labels, next));
    }
    labels
}

/// Most frequent value, smallest on ties. Sorts `values` in place.
fn plurality<T: Ord + Copy>(values: &mut [T]) -> Option<T> {
    values.sort_unstable();
    let mut best: Option<(T, usize)> = None;
    let mut i = 0;
    while i < values.len() {
        let v = values[i];
        let mut j = i;
        while j < values.len() && values[j] == v {
            j += 1;
        }
        if best.is_none_or(|(_, c)| j - i > c) {
            best = Some((v, j - i));
        }
        i = j;
    }
    best.map(|(v, _)| v)
}

/// Community chosen by the most neighbors, smallest id on ties.
pub fn plurality_community(neighbor_communities: impl IntoIterator<Item = CommunityId>) -> Option<CommunityId> {
    let mut v: Vec<CommunityId> = neighbor_communities.into_iter().collect();
    plurality(&mut v)
}

/// Entity partition found by label propagation over semantic edges
/// (parallel edges count once). Groups are ordered by their smallest member.
pub fn detect_communities(state: &GraphState, max_iters: usize) -> Vec<BTreeSet<NodeId>> {
    let nodes: Vec<NodeId> = state.entities().map(|e| e.id).collect();
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let adjacency: Vec<Vec<usize>> = nodes
        .iter()
        .map(|n| state.neighbors(*n).iter().filter_map(|m| index.get(m).copied()).collect())
        .collect();
    let labels = label_propagation(&adjacency, max_iters);
    let mut groups: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
    for (i, label) in labels.into_iter().enumerate() {
        groups.entry(label).or_default().insert(nodes[i]);
    }
    let mut out: Vec<BTreeSet<NodeId>> = groups.into_values().collect();
    out.sort_by_key(|g| g.first().copied());
    out
}

/// The current stored partition, ordered like [`detect_communities`].
pub fn stored_partition(state: &GraphState) -> Vec<BTreeSet<NodeId>> {
    let mut out: Vec<BTreeSet<NodeId>> = state.communities().map(|c| c.members.clone()).collect();
    out.sort_by_key(|g| g.first().copied());
    out
}

/// Map-reduce summary: texts are summarized in chunks of at most
/// `chunk_size`, and the partial summaries again, until one call covers
/// everything that is left.
pub fn map_reduce_summary(extractor: &dyn Extractor, texts: Vec<String>, chunk_size: usize) -> Result<String, ExtractorError> {
    let chunk_size = chunk_size.max(2);
    let mut level = texts;
    loop {
        if level.len() <= chunk_size {
            return extractor.summarize(&level);
        }
        level = level
            .chunks(chunk_size)
            .map(|c| extractor.summarize(c))
            .collect::<Result<_, _>>()?;
    }
}

/// Summary, key-term name and name embedding for a member set.
pub fn describe_members(
    state: &GraphState,
    members: &BTreeSet<NodeId>,
    extractor: &dyn Extractor,
    embedder: &dyn Embedder,
    chunk_size: usize,
) -> Result<(String, String, Vec<f32>), CommunityError> {
    let texts: Vec<String> = members
        .iter()
        .filter_map(|id| state.entity(*id))
        .map(|e| if e.summary.trim().is_empty() { e.name.clone() } else { e.summary.clone() })
        .collect();
    let summary = map_reduce_summary(extractor, texts, chunk_size)?;
    let mut name = extractor.key_terms(&summary)?;
    if name.trim().is_empty() {
        name = fallback_name(state, members);
    }
    let embedding = embedder.embed(&name)?;
    Ok((summary, name, embedding))
}

fn fallback_name(state: &GraphState, members: &BTreeSet<NodeId>) -> String {
    members
        .iter()
        .filter_map(|id| state.entity(*id))
        .take(3)
        .map(|e| e.name.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Assigns `n` to the plurality community of its neighbors, or to a new
/// singleton community when no neighbor has one. The target community is
/// marked dirty and the staleness counter advances.
pub(crate) fn extend_with_node(txn: &mut Txn<'_>, ids: &mut IdGen, n: NodeId) -> Result<CommunityId, StoreError> {
    let mut node = txn.entity(n).cloned().ok_or(StoreError::UnknownNode(n))?;
    if let Some(old) = node.community.take() {
        if let Some(mut c) = txn.community(old).cloned() {
            c.members.remove(&n);
            if c.members.is_empty() {
                txn.remove_community(old);
            } else {
                txn.put_community(c);
                txn.meta_mut().dirty.insert(old);
            }
        }
    }
    let neighbor_communities: Vec<CommunityId> = txn
        .neighbors(n)
        .into_iter()
        .filter(|m| *m != n)
        .filter_map(|m| txn.entity(m).and_then(|e| e.community))
        .collect();
    let community = match plurality_community(neighbor_communities).and_then(|id| txn.community(id).cloned()) {
        Some(mut c) => {
            c.members.insert(n);
            c
        }
        None => CommunityNode {
            id: ids.next(),
            name: node.name.clone(),
            summary: node.summary.clone(),
            name_embedding: node.name_embedding.clone(),
            members: BTreeSet::from([n]),
        },
    };
    let id = community.id;
    node.community = Some(id);
    txn.put_entity(node);
    txn.put_community(community);
    let meta = txn.meta_mut();
    meta.dirty.insert(id);
    meta.staleness += 1;
    Ok(id)
}

/// Replaces the community tier with a fresh detection run. Communities whose
/// member set is unchanged and whose summary is current are kept as they
/// are; the rest get new summaries. A community whose summary cannot be
/// produced is stored with a placeholder name and left dirty.
pub(crate) fn full_refresh(
    txn: &mut Txn<'_>,
    ids: &mut IdGen,
    extractor: &dyn Extractor,
    embedder: &dyn Embedder,
    cfg: &CommunityConfig,
) -> Result<usize, CommunityError> {
    let state = txn.base();
    let groups = detect_communities(state, cfg.max_iters);
    let mut reusable: BTreeMap<BTreeSet<NodeId>, CommunityId> = BTreeMap::new();
    for c in state.communities() {
        if !state.meta().dirty.contains(&c.id) {
            reusable.insert(c.members.clone(), c.id);
        }
    }
    let mut kept = BTreeSet::new();
    let mut assignment: BTreeMap<NodeId, CommunityId> = BTreeMap::new();
    let mut dirty = BTreeSet::new();
    for members in &groups {
        let id = match reusable.get(members) {
            Some(id) => {
                kept.insert(*id);
                *id
            }
            None => {
                let id: CommunityId = ids.next();
                let node = match describe_members(state, members, extractor, embedder, cfg.chunk_size) {
                    Ok((summary, name, name_embedding)) => CommunityNode {
                        id,
                        name,
                        summary,
                        name_embedding,
                        members: members.clone(),
                    },
                    Err(CommunityError::Embedding(e)) => return Err(e.into()),
                    Err(e) => {
                        tracing::warn!(error = %e, "community summary failed; stored as dirty");
                        dirty.insert(id);
                        let name = fallback_name(state, members);
                        let name_embedding = embedder.embed(&name)?;
                        CommunityNode {
                            id,
                            name,
                            summary: String::new(),
                            name_embedding,
                            members: members.clone(),
                        }
                    }
                };
                txn.put_community(node);
                id
            }
        };
        for m in members {
            assignment.insert(*m, id);
        }
    }
    let stale: Vec<CommunityId> = state.communities().map(|c| c.id).filter(|id| !kept.contains(id)).collect();
    for id in stale {
        txn.remove_community(id);
    }
    for e in state.entities() {
        let target = assignment.get(&e.id).copied();
        if e.community != target {
            let mut e = e.clone();
            e.community = target;
            txn.put_entity(e);
        }
    }
    let meta = txn.meta_mut();
    meta.staleness = 0;
    meta.dirty = dirty;
    Ok(groups.len())
}
