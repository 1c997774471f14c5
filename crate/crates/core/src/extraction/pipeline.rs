use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{
    EdgeDescription, EntityCandidate, EntityPass, EpisodeContext, ExtractedEntity, ExtractedFact, Extractor,
    ExtractorError, FactCandidate,
};
use crate::community;
use crate::config::GraphConfig;
use crate::embedding::{check_unit, dot, EmbedError, Embedder};
use crate::graph::{log::Record, EntityNode, Episode, EpisodeKind, EpisodicEdge, GraphState, SemanticEdge, StoreError, Txn};
use crate::ids::{EdgeId, EpisodeId, FactGroupId, IdGen, NodeId};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub entities_added: usize,
    pub entities_merged: usize,
    pub edges_added: usize,
    pub edges_invalidated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestStage {
    Entities,
    EntityResolution,
    Facts,
    FactResolution,
    Temporal,
    Invalidation,
    Communities,
    Commit,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("episode {0} was already ingested")]
    AlreadyIngested(EpisodeId),
    #[error("invalid episode: {0}")]
    InvalidEpisode(StoreError),
    #[error("extractor failed during {stage:?}: {source}")]
    Extractor {
        stage: IngestStage,
        source: ExtractorError,
        partial: IngestReport,
    },
    #[error("embedding failed during {stage:?}: {source}")]
    Embedding {
        stage: IngestStage,
        source: EmbedError,
        partial: IngestReport,
    },
    #[error("storage failed: {0}")]
    Store(#[from] StoreError),
}

impl IngestError {
    /// Progress reached before the failure. Nothing of it was kept.
    pub fn partial(&self) -> Option<IngestReport> {
        match self {
            IngestError::Extractor { partial, .. } | IngestError::Embedding { partial, .. } => Some(*partial),
            _ => None,
        }
    }
}

pub(crate) struct PlanOutput {
    pub records: Vec<Record>,
    pub report: IngestReport,
}

pub(crate) struct Deps<'a> {
    pub extractor: &'a dyn Extractor,
    pub embedder: &'a dyn Embedder,
    pub config: &'a GraphConfig,
}

pub(crate) fn validate_episode(ep: &Episode) -> Result<(), StoreError> {
    if ep.content.trim().is_empty() {
        return Err(StoreError::EmptyContent);
    }
    if ep.kind == EpisodeKind::Message && ep.actor.as_deref().is_none_or(|a| a.trim().is_empty()) {
        return Err(StoreError::MissingActor);
    }
    Ok(())
}

struct Planner<'a, 'd> {
    txn: Txn<'a>,
    deps: &'d Deps<'d>,
    ids: &'d mut IdGen,
    ctx: EpisodeContext,
    now: Timestamp,
    report: IngestReport,
}

impl Planner<'_, '_> {
    fn extractor<T>(&self, stage: IngestStage, r: Result<T, ExtractorError>) -> Result<T, IngestError> {
        r.map_err(|source| IngestError::Extractor {
            stage,
            source,
            partial: self.report,
        })
    }

    fn embed(&self, stage: IngestStage, text: &str) -> Result<Vec<f32>, IngestError> {
        let dim = self.deps.config.dim;
        self.deps
            .embedder
            .embed(text)
            .and_then(|v| check_unit(&v, dim).map(|_| v))
            .map_err(|source| IngestError::Embedding {
                stage,
                source,
                partial: self.report,
            })
    }

    fn speaker(&self) -> Option<&str> {
        match self.ctx.current.kind {
            EpisodeKind::Message => self.ctx.current.actor.as_deref(),
            _ => None,
        }
    }

    /// Both extraction passes, deduplicated by case-insensitive name, with
    /// the speaker first.
    fn extract_entities(&self) -> Result<Vec<ExtractedEntity>, IngestError> {
        let ex = self.deps.extractor;
        let first = self.extractor(IngestStage::Entities, ex.extract_entities(&self.ctx, EntityPass::Initial))?;
        let missed = self.extractor(
            IngestStage::Entities,
            ex.extract_entities(&self.ctx, EntityPass::Reflection { found: &first }),
        )?;
        let mut out: Vec<ExtractedEntity> = Vec::new();
        if let Some(speaker) = self.speaker() {
            let summary = first
                .iter()
                .chain(&missed)
                .find(|e| e.name.trim() == speaker.trim())
                .map(|e| e.summary.clone())
                .unwrap_or_default();
            out.push(ExtractedEntity {
                name: speaker.trim().to_string(),
                summary,
            });
        }
        for e in first.into_iter().chain(missed) {
            let name = e.name.trim();
            if name.is_empty() {
                tracing::warn!("extractor returned an entity without a name; skipped");
                continue;
            }
            if out.iter().any(|o| o.name.to_lowercase() == name.to_lowercase()) {
                continue;
            }
            out.push(ExtractedEntity {
                name: name.to_string(),
                summary: e.summary,
            });
        }
        Ok(out)
    }

    /// Top-K by name-embedding cosine plus top-K by full text over name and
    /// summary, plus entities created earlier in this episode.
    fn entity_candidates(&self, new: &ExtractedEntity, embedding: &[f32]) -> Vec<EntityCandidate> {
        let k = self.deps.config.entity_candidates;
        let base = self.txn.base();
        let mut ids: BTreeSet<NodeId> = BTreeSet::new();
        let mut ordered = Vec::new();
        let hits = base
            .name_vectors()
            .search(embedding, k)
            .into_iter()
            .map(|(id, _)| id)
            .chain(base.entity_text().search(&format!("{} {}", new.name, new.summary), k).into_iter().map(|(id, _)| id));
        for id in hits {
            if ids.insert(id) {
                ordered.push(id);
            }
        }
        let mut fresh: Vec<(f32, NodeId)> = self
            .txn
            .touched_entities()
            .filter(|e| base.entity(e.id).is_none())
            .map(|e| (dot(&e.name_embedding, embedding), e.id))
            .collect();
        fresh.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, id) in fresh.into_iter().take(k) {
            if ids.insert(id) {
                ordered.push(id);
            }
        }
        ordered
            .into_iter()
            .filter_map(|id| self.txn.entity(id))
            .map(|e| EntityCandidate {
                id: e.id,
                name: e.name.clone(),
                summary: e.summary.clone(),
            })
            .collect()
    }

    fn resolve_entities(&mut self, extracted: &[ExtractedEntity]) -> Result<Vec<(String, NodeId)>, IngestError> {
        let speaker = self.speaker().map(str::to_string);
        let mut resolved = Vec::new();
        for new in extracted {
            let embedding = self.embed(IngestStage::EntityResolution, &new.name)?;
            let candidates = self.entity_candidates(new, &embedding);
            let resolution = if candidates.is_empty() {
                Default::default()
            } else {
                let r = self.deps.extractor.resolve_entity(&self.ctx, &candidates, new);
                self.extractor(IngestStage::EntityResolution, r)?
            };
            let is_speaker = speaker.as_deref() == Some(new.name.as_str());
            let target = resolution
                .id
                .filter(|_| resolution.is_duplicate)
                .and_then(|id| candidates.iter().find(|c| c.id == id))
                .cloned();
            if resolution.is_duplicate && target.is_none() {
                tracing::warn!(entity = %new.name, "duplicate verdict names no known candidate; creating a new node");
            }
            let merged_name = |c: &EntityCandidate| {
                resolution
                    .name
                    .as_deref()
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .unwrap_or(&c.name)
                    .to_string()
            };
            // The speaker's node must keep the actor's name.
            let target = target.filter(|c| !is_speaker || merged_name(c) == new.name);
            let id = match target {
                Some(c) => {
                    let name = merged_name(&c);
                    let mut node = self.txn.entity(c.id).cloned().expect("candidate exists");
                    let texts: Vec<String> = [node.summary.clone(), new.summary.clone()]
                        .into_iter()
                        .filter(|s| !s.trim().is_empty())
                        .collect();
                    if !texts.is_empty() {
                        let r = self.deps.extractor.summarize(&texts);
                        node.summary = self.extractor(IngestStage::EntityResolution, r)?;
                    }
                    if name != node.name {
                        node.name_embedding = self.embed(IngestStage::EntityResolution, &name)?;
                        node.name = name;
                    }
                    self.txn.put_entity(node);
                    self.report.entities_merged += 1;
                    c.id
                }
                None => {
                    let id: NodeId = self.ids.next();
                    self.txn.put_entity(EntityNode {
                        id,
                        name: new.name.clone(),
                        summary: new.summary.clone(),
                        name_embedding: embedding,
                        community: None,
                    });
                    self.report.entities_added += 1;
                    id
                }
            };
            resolved.push((new.name.clone(), id));
        }
        Ok(resolved)
    }

    fn link_episode(&mut self, nodes: &[NodeId]) {
        let episode = self.ctx.current.id;
        let mut seen = BTreeSet::new();
        for n in nodes {
            if seen.insert(*n) {
                let id = self.ids.next();
                self.txn.put_episodic(EpisodicEdge {
                    id,
                    episode,
                    entity: *n,
                });
            }
        }
    }

    /// Extracted facts mapped onto node pairs. A fact text shared by more
    /// than two entities is lowered to one fact per entity pair, all in one
    /// fact group.
    fn lower_facts(
        &self,
        facts: Vec<ExtractedFact>,
        names: &HashMap<String, NodeId>,
    ) -> Vec<(NodeId, NodeId, ExtractedFact, Option<usize>)> {
        let lookup = |name: &str| names.get(&name.trim().to_lowercase()).copied();
        let mut by_text: BTreeMap<String, Vec<(NodeId, NodeId, ExtractedFact)>> = BTreeMap::new();
        let mut text_order: Vec<String> = Vec::new();
        for f in facts {
            let (Some(s), Some(t)) = (lookup(&f.source), lookup(&f.target)) else {
                tracing::warn!(source = %f.source, target = %f.target, "fact names an unknown entity; skipped");
                continue;
            };
            if s == t || f.fact.trim().is_empty() {
                continue;
            }
            let key = f.fact.trim().to_string();
            if !by_text.contains_key(&key) {
                text_order.push(key.clone());
            }
            by_text.entry(key).or_default().push((s, t, f));
        }
        let mut out = Vec::new();
        for (group_index, key) in text_order.into_iter().enumerate() {
            let group = by_text.remove(&key).unwrap_or_default();
            let mut members: Vec<NodeId> = Vec::new();
            for (s, t, _) in &group {
                for n in [*s, *t] {
                    if !members.contains(&n) {
                        members.push(n);
                    }
                }
            }
            if members.len() <= 2 {
                let mut pairs = BTreeSet::new();
                for (s, t, f) in group {
                    if pairs.insert(crate::graph::unordered(s, t)) {
                        out.push((s, t, f, None));
                    }
                }
                continue;
            }
            let template = group[0].2.clone();
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    let explicit = group.iter().find(|(s, t, _)| crate::graph::unordered(*s, *t) == crate::graph::unordered(*a, *b));
                    let (s, t, f) = match explicit {
                        Some((s, t, f)) => (*s, *t, f.clone()),
                        None => (*a, *b, template.clone()),
                    };
                    out.push((s, t, f, Some(group_index)));
                }
            }
        }
        out
    }

    fn add_facts(&mut self, resolved: &[(String, NodeId)]) -> Result<Vec<EdgeId>, IngestError> {
        let entities: Vec<ExtractedEntity> = resolved
            .iter()
            .map(|(name, id)| ExtractedEntity {
                name: name.clone(),
                summary: self.txn.entity(*id).map(|e| e.summary.clone()).unwrap_or_default(),
            })
            .collect();
        let facts = self.deps.extractor.extract_facts(&self.ctx, &entities);
        let facts = self.extractor(IngestStage::Facts, facts)?;
        let names: HashMap<String, NodeId> = resolved.iter().map(|(n, id)| (n.to_lowercase(), *id)).collect();
        let lowered = self.lower_facts(facts, &names);

        let mut groups: HashMap<usize, FactGroupId> = HashMap::new();
        let mut embeddings: HashMap<String, Vec<f32>> = HashMap::new();
        let mut created = Vec::new();
        let episode = self.ctx.current.id;
        for (source, target, fact, group) in lowered {
            let existing: Vec<FactCandidate> = self
                .txn
                .edges_between(source, target)
                .into_iter()
                .map(|e| FactCandidate {
                    id: e.id,
                    predicate: e.predicate.clone(),
                    fact: e.fact.clone(),
                })
                .collect();
            if !existing.is_empty() {
                let r = self.deps.extractor.resolve_fact(&existing, &fact);
                let resolution = self.extractor(IngestStage::FactResolution, r)?;
                let dup = resolution
                    .id
                    .filter(|_| resolution.is_duplicate)
                    .filter(|id| existing.iter().any(|c| c.id == *id));
                if let Some(id) = dup {
                    let mut edge = self.txn.edge(id).cloned().expect("candidate exists");
                    if !edge.episodes.contains(&episode) {
                        edge.episodes.push(episode);
                        self.txn.put_edge(edge);
                    }
                    continue;
                }
            }
            let fact_text = fact.fact.trim().to_string();
            let fact_embedding = match embeddings.get(&fact_text) {
                Some(v) => v.clone(),
                None => {
                    let v = self.embed(IngestStage::Facts, &fact_text)?;
                    embeddings.insert(fact_text.clone(), v.clone());
                    v
                }
            };
            let fact_group = group.map(|g| *groups.entry(g).or_insert_with(|| self.ids.next()));
            let (t_valid, t_invalid) = self.annotate(&fact)?;
            let id: EdgeId = self.ids.next();
            self.txn.put_edge(SemanticEdge {
                id,
                source,
                target,
                predicate: normalize_predicate(&fact.predicate),
                fact: fact_text,
                fact_embedding,
                fact_group,
                t_created: self.now,
                t_expired: None,
                t_valid,
                t_invalid,
                episodes: vec![episode],
            });
            self.report.edges_added += 1;
            created.push(id);
        }
        Ok(created)
    }

    fn annotate(&self, fact: &ExtractedFact) -> Result<(Option<Timestamp>, Option<Timestamp>), IngestError> {
        let r = self.deps.extractor.extract_temporal(&self.ctx, self.ctx.current.t_ref, fact);
        let ann = self.extractor(IngestStage::Temporal, r)?;
        let parse = |v: &Option<String>| -> Result<Option<Timestamp>, ()> {
            match v.as_deref().map(str::trim) {
                None | Some("") | Some("null") => Ok(None),
                Some(s) => Timestamp::parse(s).map(Some).map_err(|_| ()),
            }
        };
        match (parse(&ann.valid_at), parse(&ann.invalid_at)) {
            (Ok(v), Ok(i)) => {
                if let (Some(v), Some(iv)) = (v, i) {
                    if iv < v {
                        tracing::warn!(fact = %fact.fact, "invalid_at precedes valid_at; end dropped");
                        return Ok((Some(v), None));
                    }
                }
                Ok((v, i))
            }
            _ => {
                tracing::warn!(fact = %fact.fact, ?ann, "unparseable temporal annotation; stored without dates");
                Ok((None, None))
            }
        }
    }

    /// Asks the extractor which related edges each new edge contradicts and
    /// closes those whose validity overlaps the new edge's.
    fn invalidate(&mut self, created: &[EdgeId]) -> Result<(), IngestError> {
        let k = self.deps.config.contradiction_candidates;
        let fresh: BTreeSet<EdgeId> = created.iter().copied().collect();
        for id in created {
            let new = self.txn.edge(*id).cloned().expect("edge was just created");
            let mut related: Vec<(f32, &SemanticEdge)> = self
                .txn
                .incident_edges(new.source)
                .into_iter()
                .chain(self.txn.incident_edges(new.target))
                .filter(|e| !fresh.contains(&e.id) && e.t_expired.is_none())
                .map(|e| (dot(&e.fact_embedding, &new.fact_embedding), e))
                .collect();
            related.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.id.cmp(&b.1.id)));
            related.dedup_by_key(|(_, e)| e.id);
            related.truncate(k);
            if related.is_empty() {
                continue;
            }
            let describe = |e: &SemanticEdge| EdgeDescription {
                id: e.id,
                source: e.source,
                source_name: self.txn.entity(e.source).map(|n| n.name.clone()).unwrap_or_default(),
                target: e.target,
                target_name: self.txn.entity(e.target).map(|n| n.name.clone()).unwrap_or_default(),
                predicate: e.predicate.clone(),
                fact: e.fact.clone(),
                valid_at: e.t_valid,
                invalid_at: e.t_invalid,
            };
            let candidates: Vec<EdgeDescription> = related.iter().map(|(_, e)| describe(e)).collect();
            let r = self.deps.extractor.detect_contradictions(&describe(&new), &candidates);
            let contradicted = self.extractor(IngestStage::Invalidation, r)?;
            let start = new.t_valid.unwrap_or(new.t_created);
            for old_id in contradicted {
                if old_id == new.id || !candidates.iter().any(|c| c.id == old_id) {
                    continue;
                }
                let mut old = self.txn.edge(old_id).cloned().expect("candidate exists");
                if !closes(&old, start, new.t_invalid) {
                    continue;
                }
                old.t_invalid = Some(start);
                old.t_expired = Some(self.now.max(old.t_created));
                self.txn.put_edge(old);
                self.report.edges_invalidated += 1;
            }
        }
        Ok(())
    }
}

/// Whether a contradicted edge is closed at `start`: its validity must
/// overlap `[start, end)` and must not begin after `start`.
fn closes(old: &SemanticEdge, start: Timestamp, end: Option<Timestamp>) -> bool {
    let overlaps = old.t_invalid.is_none_or(|i| start < i) && match (old.t_valid, end) {
        (Some(v), Some(e)) => v < e,
        _ => true,
    };
    overlaps && old.t_valid.is_none_or(|v| v <= start)
}

/// Upper-case, underscores between words.
fn normalize_predicate(p: &str) -> String {
    let words: Vec<String> = p
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_uppercase)
        .collect();
    if words.is_empty() {
        "RELATED_TO".to_string()
    } else {
        words.join("_")
    }
}

/// Runs the full pipeline for `ep` against `state` without modifying it and
/// returns the records that apply the episode atomically.
pub(crate) fn plan_ingest(
    state: &GraphState,
    mut ep: Episode,
    deps: &Deps<'_>,
    ids: &mut IdGen,
    now: Timestamp,
) -> Result<PlanOutput, IngestError> {
    if state.episode(ep.id).is_some() {
        return Err(IngestError::AlreadyIngested(ep.id));
    }
    validate_episode(&ep).map_err(IngestError::InvalidEpisode)?;
    if let Some(actor) = ep.actor.as_mut() {
        *actor = actor.trim().to_string();
    }
    ep.t_ingested = now;
    let previous = state
        .recent_episodes(&ep.group, deps.config.context_window)
        .into_iter()
        .cloned()
        .collect();
    let ctx = EpisodeContext {
        current: ep.clone(),
        previous,
    };
    let mut txn = Txn::new(state);
    txn.set_episode(ep);
    let mut p = Planner {
        txn,
        deps,
        ids,
        ctx,
        now,
        report: IngestReport::default(),
    };
    let extracted = p.extract_entities()?;
    let resolved = p.resolve_entities(&extracted)?;
    let nodes: Vec<NodeId> = resolved.iter().map(|(_, id)| *id).collect();
    p.link_episode(&nodes);
    let created = p.add_facts(&resolved)?;
    p.invalidate(&created)?;

    let new_nodes: Vec<NodeId> = p
        .txn
        .touched_entities()
        .filter(|e| state.entity(e.id).is_none())
        .map(|e| e.id)
        .collect();
    for n in new_nodes {
        community::extend_with_node(&mut p.txn, p.ids, n)?;
    }
    let meta = p.txn.meta_mut();
    meta.high_water = meta.high_water.max(now);
    let report = p.report;
    Ok(PlanOutput {
        records: p.txn.into_records(),
        report,
    })
}
