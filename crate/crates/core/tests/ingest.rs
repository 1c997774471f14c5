mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use common::*;
use tkg_core::extraction::{
    EdgeDescription, EntityCandidate, EntityPass, EntityResolution, EpisodeContext, ExtractedEntity, ExtractedFact,
    Extractor, ExtractorError, FactCandidate, FactResolution, MockStage, TemporalAnnotation,
};
use tkg_core::{EdgeId, Episode, Graph, IdGen, IngestError, MockExtractor, Timestamp};

fn names(g: &Graph) -> BTreeSet<String> {
    g.snapshot().entities().map(|e| e.name.clone()).collect()
}

fn image(g: &Graph) -> String {
    serde_json::to_string(&g.snapshot().to_records()).unwrap()
}

#[test]
fn work_statement_yields_speaker_company_and_fact() {
    let g = test_graph(128, 1);
    let mut ids = IdGen::seeded(1);
    let report = g.ingest(msg("Alice", "I work at Acme Corp", ymd(2024, 3, 1), &mut ids)).unwrap();
    assert_eq!(names(&g), ["Acme Corp", "Alice"].map(String::from).into_iter().collect());
    let edges = all_edges(&g);
    assert_eq!(edges.len(), 1);
    let s = g.snapshot();
    let e = &edges[0];
    assert_eq!(s.entity(e.source).unwrap().name, "Alice");
    assert_eq!(s.entity(e.target).unwrap().name, "Acme Corp");
    assert_eq!(e.predicate, "WORKS_FOR");
    assert_eq!(e.fact, "Alice works at Acme Corp");
    assert_eq!(report.entities_added, 2);
    assert_eq!(report.edges_added, 1);
    assert_eq!(s.episodic_edges().count(), 2);
}

#[test]
fn reingesting_an_episode_is_rejected_without_changes() {
    let g = test_graph(128, 1);
    let ep = Episode::message("Alice", "I work at Acme Corp", ymd(2024, 3, 1));
    g.ingest(ep.clone()).unwrap();
    let before = image(&g);
    assert!(matches!(g.ingest(ep), Err(IngestError::AlreadyIngested(_))));
    assert_eq!(image(&g), before);
}

#[test]
fn small_talk_only_adds_the_speaker() {
    let g = test_graph(128, 1);
    let mut ids = IdGen::seeded(1);
    g.ingest(msg("Alice", "haha, that sounds great to me.", ymd(2024, 3, 1), &mut ids)).unwrap();
    assert_eq!(names(&g), ["Alice".to_string()].into_iter().collect());
    assert!(all_edges(&g).is_empty());
}

#[test]
fn invalid_episodes_are_rejected() {
    let g = test_graph(128, 1);
    let err = g.ingest(Episode::text("  ", ymd(2024, 1, 1))).unwrap_err();
    assert!(matches!(err, IngestError::InvalidEpisode(_)));
    assert_eq!(g.snapshot().episode_count(), 0);
}

#[test]
fn same_name_resolves_to_one_node() {
    let g = test_graph(128, 1);
    let mut ids = IdGen::seeded(1);
    g.ingest(msg("Bob", "I admire Alan Turing.", ymd(2024, 3, 1), &mut ids)).unwrap();
    let report = g.ingest(msg("Carol", "I read about Alan Turing.", ymd(2024, 3, 2), &mut ids)).unwrap();
    let turings = g.snapshot().entities().filter(|e| e.name == "Alan Turing").count();
    assert_eq!(turings, 1);
    assert_eq!(report.entities_merged, 1);
}

#[test]
fn abbreviated_name_merges_with_token_subset_resolution() {
    let g = graph_with(Arc::new(MockExtractor::new().with_token_subset_resolution(true)), |_| {});
    let mut ids = IdGen::seeded(1);
    g.ingest(msg("Bob", "I admire Alan Turing.", ymd(2024, 3, 1), &mut ids)).unwrap();
    let count = g.snapshot().entity_count();
    g.ingest(msg("Bob", "I cited A. Turing in my thesis.", ymd(2024, 3, 2), &mut ids)).unwrap();
    assert_eq!(g.snapshot().entity_count(), count);
    assert!(names(&g).contains("Alan Turing"));
}

#[test]
fn multi_entity_fact_becomes_one_edge_per_pair() {
    let g = test_graph(128, 1);
    let mut ids = IdGen::seeded(1);
    g.ingest(msg("Dana", "Alice met Bob and Carol.", ymd(2024, 3, 1), &mut ids)).unwrap();
    let s = g.snapshot();
    let edges = all_edges(&g);
    let grouped: Vec<_> = edges.iter().filter(|e| e.fact_group.is_some()).collect();
    assert_eq!(grouped.len(), 3, "{edges:?}");
    let group = grouped[0].fact_group;
    assert!(grouped.iter().all(|e| e.fact_group == group && e.fact == grouped[0].fact));
    let pairs: BTreeSet<BTreeSet<String>> = grouped
        .iter()
        .map(|e| [e.source, e.target].iter().map(|n| s.entity(*n).unwrap().name.clone()).collect())
        .collect();
    let want: BTreeSet<BTreeSet<String>> = [["Alice", "Bob"], ["Alice", "Carol"], ["Bob", "Carol"]]
        .iter()
        .map(|p| p.iter().map(|x| x.to_string()).collect())
        .collect();
    assert_eq!(pairs, want);
}

#[test]
fn repeated_fact_grows_provenance_and_pairs_stay_separate() {
    let g = test_graph(128, 1);
    let mut ids = IdGen::seeded(1);
    g.ingest(msg("Dana", "Alice met Bob and Carol.", ymd(2024, 3, 1), &mut ids)).unwrap();
    let before: BTreeMap<EdgeId, usize> = all_edges(&g).iter().map(|e| (e.id, e.episodes.len())).collect();
    let report = g.ingest(msg("Dana", "Alice met Bob and Carol.", ymd(2024, 3, 2), &mut ids)).unwrap();
    assert_eq!(report.edges_added, 0);
    let after = all_edges(&g);
    assert_eq!(after.len(), before.len());
    for e in &after {
        assert_eq!(e.episodes.len(), before[&e.id] + 1, "{e:?}");
    }
    // Identical text on three different pairs stayed three edges.
    let texts: BTreeSet<&str> = after.iter().map(|e| e.fact.as_str()).collect();
    assert_eq!(texts.len(), 1);
    assert_eq!(after.len(), 3);
}

#[test]
fn relative_and_absolute_dates() {
    let g = test_graph(128, 1);
    let mut ids = IdGen::seeded(1);
    let t_ref = ts("2024-03-15T00:00:00Z");
    g.ingest(msg("Alice", "I started working at Acme Corp two weeks ago.", t_ref, &mut ids)).unwrap();
    g.ingest(msg("Bob", "I joined Globex in 2020.", t_ref, &mut ids)).unwrap();
    let t_now = ts("2024-03-15T12:30:00Z");
    g.ingest(msg("Carol", "I live in Lisbon.", t_now, &mut ids)).unwrap();
    g.ingest(msg("Dave", "I visited Osaka.", t_now, &mut ids)).unwrap();
    let e = all_edges(&g);
    assert_eq!(edge_by_fact(&e, "Acme").t_valid, Some(ts("2024-03-01T00:00:00Z")));
    assert_eq!(edge_by_fact(&e, "Globex").t_valid, Some(ts("2020-01-01T00:00:00Z")));
    assert_eq!(edge_by_fact(&e, "Lisbon").t_valid, Some(t_now));
    let osaka = edge_by_fact(&e, "Osaka");
    assert_eq!((osaka.t_valid, osaka.t_invalid), (None, None));
}

/// Mock extractor with a fixed temporal answer and an extra fact.
struct Rigged {
    inner: MockExtractor,
    temporal: Option<TemporalAnnotation>,
    extra_fact: Option<ExtractedFact>,
}

impl Extractor for Rigged {
    fn extract_entities(&self, ctx: &EpisodeContext, pass: EntityPass<'_>) -> Result<Vec<ExtractedEntity>, ExtractorError> {
        self.inner.extract_entities(ctx, pass)
    }

    fn resolve_entity(
        &self,
        ctx: &EpisodeContext,
        candidates: &[EntityCandidate],
        new: &ExtractedEntity,
    ) -> Result<EntityResolution, ExtractorError> {
        self.inner.resolve_entity(ctx, candidates, new)
    }

    fn extract_facts(&self, ctx: &EpisodeContext, entities: &[ExtractedEntity]) -> Result<Vec<ExtractedFact>, ExtractorError> {
        let mut facts = self.inner.extract_facts(ctx, entities)?;
        facts.extend(self.extra_fact.clone());
        Ok(facts)
    }

    fn resolve_fact(&self, existing: &[FactCandidate], new: &ExtractedFact) -> Result<FactResolution, ExtractorError> {
        self.inner.resolve_fact(existing, new)
    }

    fn extract_temporal(
        &self,
        ctx: &EpisodeContext,
        reference: Timestamp,
        fact: &ExtractedFact,
    ) -> Result<TemporalAnnotation, ExtractorError> {
        match &self.temporal {
            Some(t) => Ok(t.clone()),
            None => self.inner.extract_temporal(ctx, reference, fact),
        }
    }

    fn detect_contradictions(&self, new: &EdgeDescription, related: &[EdgeDescription]) -> Result<Vec<EdgeId>, ExtractorError> {
        self.inner.detect_contradictions(new, related)
    }

    fn summarize(&self, texts: &[String]) -> Result<String, ExtractorError> {
        self.inner.summarize(texts)
    }

    fn key_terms(&self, summary: &str) -> Result<String, ExtractorError> {
        self.inner.key_terms(summary)
    }
}

#[test]
fn unparseable_dates_leave_the_edge_undated() {
    let g = graph_with(Arc::new(Rigged {
        inner: MockExtractor::new(),
        temporal: Some(TemporalAnnotation {
            valid_at: Some("last Tuesday-ish".into()),
            invalid_at: Some("2021-01-01T00:00:00Z".into()),
        }),
        extra_fact: None,
    }), |_| {});
    let mut ids = IdGen::seeded(1);
    g.ingest(msg("Alice", "I work at Acme Corp", ymd(2024, 3, 1), &mut ids)).unwrap();
    let e = &all_edges(&g)[0];
    assert_eq!((e.t_valid, e.t_invalid), (None, None));
}

#[test]
fn end_before_start_keeps_only_the_start() {
    let g = graph_with(Arc::new(Rigged {
        inner: MockExtractor::new(),
        temporal: Some(TemporalAnnotation {
            valid_at: Some("2022-01-01T00:00:00Z".into()),
            invalid_at: Some("2021-01-01T00:00:00Z".into()),
        }),
        extra_fact: None,
    }), |_| {});
    let mut ids = IdGen::seeded(1);
    g.ingest(msg("Alice", "I work at Acme Corp", ymd(2024, 3, 1), &mut ids)).unwrap();
    let e = &all_edges(&g)[0];
    assert_eq!((e.t_valid, e.t_invalid), (Some(ymd(2022, 1, 1)), None));
}

#[test]
fn facts_about_unknown_entities_are_skipped() {
    let g = graph_with(Arc::new(Rigged {
        inner: MockExtractor::new(),
        temporal: None,
        extra_fact: Some(ExtractedFact {
            source: "Alice".into(),
            target: "Nobody Mentioned".into(),
            predicate: "KNOWS".into(),
            fact: "Alice knows Nobody Mentioned".into(),
        }),
    }), |_| {});
    let mut ids = IdGen::seeded(1);
    let report = g.ingest(msg("Alice", "I work at Acme Corp", ymd(2024, 3, 1), &mut ids)).unwrap();
    assert_eq!(report.edges_added, 1);
    assert!(!names(&g).contains("Nobody Mentioned"));
}

#[test]
fn any_extractor_failure_rolls_back_the_episode() {
    let mock = Arc::new(MockExtractor::new());
    let g = graph_with(mock.clone(), |_| {});
    let mut ids = IdGen::seeded(1);
    g.ingest(msg("Alice", "I moved to Boston in 2020. I work at Acme Corp.", ymd(2020, 3, 1), &mut ids)).unwrap();
    let stages = [
        MockStage::ExtractEntities,
        MockStage::ResolveEntity,
        MockStage::ExtractFacts,
        MockStage::ResolveFact,
        MockStage::ExtractTemporal,
        MockStage::DetectContradictions,
    ];
    for stage in stages {
        let before = image(&g);
        mock.fail_at(stage);
        let err = match g.ingest(msg("Alice", "I moved to Paris in 2024 with Bob. I work at Acme Corp.", ymd(2024, 3, 1), &mut ids)) {
            Err(e) => e,
            Ok(r) => panic!("{stage:?} did not fail: {r:?}"),
        };
        assert!(matches!(err, IngestError::Extractor { .. }), "{stage:?}: {err}");
        assert!(err.partial().is_some());
        assert_eq!(image(&g), before, "{stage:?} left changes behind");
        mock.clear_failures();
    }
    g.ingest(msg("Alice", "I moved to Paris in 2024.", ymd(2024, 3, 1), &mut ids)).unwrap();
    let e = all_edges(&g);
    assert_eq!(edge_by_fact(&e, "Boston").t_invalid, Some(ymd(2024, 1, 1)));
}

#[test]
fn failure_after_partial_progress_reports_it() {
    let mock = Arc::new(MockExtractor::new());
    let g = graph_with(mock.clone(), |_| {});
    let mut ids = IdGen::seeded(1);
    mock.fail_after(MockStage::ExtractTemporal, 1);
    let err = g
        .ingest(msg("Dana", "Alice met Bob and Carol.", ymd(2024, 3, 1), &mut ids))
        .unwrap_err();
    let partial = err.partial().unwrap();
    assert!(partial.entities_added >= 3, "{partial:?}");
    assert_eq!(g.snapshot().entity_count(), 0);
    assert_eq!(g.snapshot().episode_count(), 0);
}

#[test]
fn random_sequences_keep_graph_invariants() {
    for seed in 0..4 {
        let g = test_graph(64, seed);
        let episodes = random_episodes(seed, 80);
        for ep in &episodes {
            g.ingest(ep.clone()).unwrap();
        }
        let s = g.snapshot();
        // No two edges on one pair repeat (predicate, fact).
        let mut seen = BTreeSet::new();
        for e in s.edges() {
            assert!(seen.insert((e.pair(), e.predicate.clone(), e.fact.clone())), "duplicate {e:?}");
            for ep in &e.episodes {
                let stored = s.episode(*ep).expect("provenance resolves");
                let original = episodes.iter().find(|x| x.id == *ep).unwrap();
                assert_eq!(stored.content, original.content);
            }
        }
        // Every message links to an entity named after its speaker.
        for ep in s.episodes() {
            let actor = ep.actor.as_deref().unwrap();
            assert!(s.entities_of(ep.id).any(|n| s.entity(n).unwrap().name == actor), "{ep:?}");
        }
    }
}
