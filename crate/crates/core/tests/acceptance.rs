//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tkg_core::context::{build_context, ContextOptions, FactLine};
use tkg_core::embedding::normalize;
use tkg_core::index::{Bm25Params, InvertedIndex, VectorIndex};
use tkg_core::rerank::{mmr, rrf};
use tkg_core::synth::{populate_bench_graph, transcript, BenchSpec, TranscriptSpec};
use tkg_core::{
    CommunityId, CommunityNode, EdgeId, EntityNode, Graph, GraphConfig, IdGen, ManualClock, NodeId, Query,
    RerankConfig, SemanticEdge, Timestamp,
};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let checks: &[(&str, Check)] = &[
        ("bi-temporal invariants over random ingestion", bitemporal_invariants),
        ("invalidation golden and as-of search", invalidation_golden),
        ("bm25 matches brute-force oracle", bm25_oracle_equivalence),
        ("cosine top-k equals linear scan", cosine_exactness),
        ("label propagation fixtures and refresh", label_propagation),
        ("rrf and mmr unit targets", rrf_mmr_targets),
        ("context golden files", context_golden),
        ("deterministic ingestion and search", determinism),
        ("desk-scale latency and context size", latency),
        ("end-to-end planted fact retrieval", end_to_end_recall),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---- bi-temporal invariants ---------------------------------------------------------

struct Seen {
    t_valid: Option<Timestamp>,
    t_invalid: Option<Timestamp>,
    t_expired: Option<Timestamp>,
}

/// Checks one ingestion step. `before` holds the state of every edge prior
/// to the step and is updated in place.
fn check_step(before: &mut HashMap<EdgeId, Seen>, edges: &[SemanticEdge]) -> Result<usize, String> {
    let fresh: Vec<&SemanticEdge> = edges.iter().filter(|e| !before.contains_key(&e.id)).collect();
    let mut invalidated = 0;
    for e in edges {
        ensure(e.intervals_ordered(), || format!("edge out of order: {e:?}"))?;
        let Some(old) = before.get(&e.id) else { continue };
        ensure(old.t_valid.is_none() || old.t_valid == e.t_valid, || format!("t_valid rewritten: {e:?}"))?;
        // An explicit end can move earlier when a contradiction overlaps it,
        // but is never cleared or extended.
        let end_ok = match (old.t_invalid, e.t_invalid) {
            (Some(was), Some(now)) => now <= was,
            (Some(_), None) => false,
            (None, _) => true,
        };
        ensure(end_ok, || format!("t_invalid cleared or extended: {e:?}"))?;
        ensure(old.t_expired.is_none() || old.t_expired == e.t_expired, || format!("t_expired changed: {e:?}"))?;
        if old.t_expired.is_none() && e.t_expired.is_some() {
            invalidated += 1;
            // The invalidating edge is one created in the same step: its
            // validity start (or creation time) closes the old interval.
            let cause = fresh.iter().find(|n| {
                let start = n.t_valid.unwrap_or(n.t_created);
                n.source == e.source
                    && n.predicate == e.predicate
                    && e.t_invalid == Some(start)
                    && e.t_expired == Some(n.t_created)
            });
            let n = cause.ok_or_else(|| format!("no invalidating edge explains {e:?}"))?;
            let overlap = old.t_invalid.is_none_or(|i| n.t_valid.unwrap_or(n.t_created) < i)
                && n.t_invalid.is_none_or(|i| old.t_valid.is_none_or(|v| v < i));
            ensure(overlap, || format!("closed without overlap: {e:?} by {n:?}"))?;
        }
    }
    for n in &fresh {
        ensure(n.t_expired.is_none(), || format!("edge invalidated by its own episode: {n:?}"))?;
    }
    for e in edges {
        before.insert(
            e.id,
            Seen {
                t_valid: e.t_valid,
                t_invalid: e.t_invalid,
                t_expired: e.t_expired,
            },
        );
    }
    Ok(invalidated)
}

/// Runs a contradiction fixture: ingests `(t_ref, content)` messages from
/// Alice and returns the edges.
fn run_fixture(messages: &[(&str, &str)]) -> Vec<SemanticEdge> {
    let g = test_graph(128, 17);
    let mut ids = IdGen::seeded(5);
    for (t, content) in messages {
        g.ingest(msg("Alice", content, ts(t), &mut ids)).unwrap();
    }
    all_edges(&g)
}

fn contradiction_fixtures() -> Result<usize, String> {
    // Overlapping: old closes at the new edge's valid start.
    let e = run_fixture(&[
        ("2020-03-01T10:00:00Z", "I moved to Boston in 2020."),
        ("2024-02-01T10:00:00Z", "I moved to Paris in 2024."),
    ]);
    let (old, new) = (edge_by_fact(&e, "Boston"), edge_by_fact(&e, "Paris"));
    ensure(old.t_invalid == new.t_valid && old.t_expired == Some(new.t_created), || format!("overlap: {old:?}"))?;
    ensure(new.t_invalid.is_none() && new.t_expired.is_none(), || format!("new edge touched: {new:?}"))?;

    // Disjoint intervals: untouched.
    let e = run_fixture(&[
        ("2022-03-01T10:00:00Z", "I lived in Boston from 2018 to 2021."),
        ("2024-02-01T10:00:00Z", "I live in Paris."),
    ]);
    let old = edge_by_fact(&e, "Boston");
    ensure(old.t_invalid == Some(ymd(2021, 1, 1)) && old.t_expired.is_none(), || format!("disjoint: {old:?}"))?;

    // New edge without a valid time: its creation time closes the old one.
    let e = run_fixture(&[
        ("2020-03-01T10:00:00Z", "I live in Boston."),
        ("2024-02-01T10:00:00Z", "I moved to Paris."),
    ]);
    let (old, new) = (edge_by_fact(&e, "Boston"), edge_by_fact(&e, "Paris"));
    ensure(new.t_valid.is_none(), || format!("fixture expects unset t_valid: {new:?}"))?;
    ensure(old.t_invalid == Some(new.t_created) && old.t_expired == Some(new.t_created), || format!("fallback: {old:?}"))?;

    // Employer change stated in the present tense.
    let e = run_fixture(&[
        ("2023-05-01T09:00:00Z", "I work at Acme Corp."),
        ("2024-02-01T09:30:00Z", "I work at Globex."),
    ]);
    let (old, new) = (edge_by_fact(&e, "Acme"), edge_by_fact(&e, "Globex"));
    ensure(old.t_invalid == Some(ts("2024-02-01T09:30:00Z")) && new.t_valid == old.t_invalid, || format!("employer: {old:?}"))?;

    // A contradiction that starts before the existing fact cannot end it.
    let e = run_fixture(&[
        ("2024-03-01T10:00:00Z", "I moved to Paris in 2024."),
        ("2024-04-01T10:00:00Z", "I moved to Boston in 2020."),
    ]);
    let old = edge_by_fact(&e, "Paris");
    ensure(old.t_invalid.is_none() && old.t_expired.is_none(), || format!("backdated: {old:?}"))?;
    Ok(5)
}

fn bitemporal_invariants() -> Result<String, String> {
    let start = Instant::now();
    let fixtures = contradiction_fixtures()?;
    let (runs, per_run) = (20, 55);
    let mut invalidations = 0;
    let mut edges_seen = 0;
    for run in 0..runs {
        let g = test_graph(64, 100 + run);
        let mut before: HashMap<EdgeId, Seen> = HashMap::new();
        for ep in random_episodes(run, per_run) {
            g.ingest(ep).map_err(|e| format!("ingest failed: {e}"))?;
            invalidations += check_step(&mut before, &all_edges(&g))?;
        }
        edges_seen += before.len();
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    ensure(invalidations > 0, || "random runs never invalidated anything".into())?;
    Ok(format!(
        "{} episodes, {edges_seen} edges, {invalidations} invalidations, {fixtures} fixtures, {secs:.1}s",
        runs * per_run as u64
    ))
}

// ---- invalidation golden ----------------------------------------------------------------

fn invalidation_golden() -> Result<String, String> {
    let g = test_graph(256, 3);
    let mut ids = IdGen::seeded(9);
    g.ingest(msg("Alice", "I moved to Boston in 2020.", ts("2020-03-01T10:00:00Z"), &mut ids)).unwrap();
    g.ingest(msg("Alice", "I moved to Paris in 2024.", ts("2024-02-01T10:00:00Z"), &mut ids)).unwrap();
    let e = all_edges(&g);
    let (boston, paris) = (edge_by_fact(&e, "Boston"), edge_by_fact(&e, "Paris"));
    ensure(boston.t_valid == Some(ymd(2020, 1, 1)), || format!("boston t_valid {:?}", boston.t_valid))?;
    ensure(paris.t_valid == Some(ymd(2024, 1, 1)), || format!("paris t_valid {:?}", paris.t_valid))?;
    ensure(boston.t_invalid == paris.t_valid, || format!("boston t_invalid {:?}", boston.t_invalid))?;

    let facts_at = |t: Timestamp| -> Vec<String> {
        let q = Query::new("Where does Alice live?").as_of(t);
        g.retrieve(&q, &RerankConfig::default()).unwrap().edges.into_iter().map(|h| h.fact).collect()
    };
    let at_2022 = facts_at(ymd(2022, 6, 1));
    let at_2025 = facts_at(ymd(2025, 6, 1));
    ensure(at_2022 == ["Alice moved to Boston in 2020"], || format!("as of 2022: {at_2022:?}"))?;
    ensure(at_2025 == ["Alice moved to Paris in 2024"], || format!("as of 2025: {at_2025:?}"))?;
    Ok(format!("t_invalid = {}", boston.t_invalid.unwrap()))
}

// ---- bm25 -------------------------------------------------------------------------------

fn corpora() -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![
        vec!["Alice works at Acme".into(), "Bob works at Globex".into(), "Acme hired Alice and Bob".into()],
        vec![
            "the quick brown fox".into(),
            "the lazy dog sleeps".into(),
            "a quick dog and a quick fox".into(),
            "nothing to see here".into(),
        ],
        vec![
            "Alice moved to Paris in 2024".into(),
            "Alice lived in Boston".into(),
            "Paris is lovely in spring".into(),
            "Boston Boston Boston".into(),
            "Carol visited Paris and Boston".into(),
        ],
    ];
    let vocab = [
        "alice", "bob", "carol", "acme", "globex", "paris", "boston", "works", "lives", "met", "visited", "the",
        "data", "graph", "memory", "agent", "fact", "time",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for size in [30, 50] {
        out.push(
            (0..size)
                .map(|_| {
                    let n = rng.gen_range(1..15);
                    (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect::<Vec<_>>().join(" ")
                })
                .collect(),
        );
    }
    out
}

fn bm25_oracle_equivalence() -> Result<String, String> {
    let queries = ["alice acme", "quick fox", "paris boston", "graph memory time", "works at", "bob carol zebra"];
    let mut compared = 0;
    let mut worst = 0f64;
    for (ci, docs) in corpora().iter().enumerate() {
        let mut idx: InvertedIndex<usize> = InvertedIndex::new(Bm25Params::default());
        for (i, d) in docs.iter().enumerate() {
            idx.insert(i, d);
        }
        let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
        for q in queries {
            let expected = bm25_oracle(&refs, q);
            let got: BTreeMap<usize, f64> = idx.search(q, usize::MAX).into_iter().collect();
            for (i, want) in expected.iter().enumerate() {
                let have = got.get(&i).copied().unwrap_or(0.0);
                let diff = (have - want).abs();
                worst = worst.max(diff);
                ensure(diff <= 1e-9, || format!("corpus {ci} doc {i} query {q:?}: {have} vs {want}"))?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} scores, max error {worst:.1e}"))
}

// ---- cosine -------------------------------------------------------------------------------

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let mut v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        if normalize(&mut v) {
            return v;
        }
    }
}

fn cosine_exactness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dims = [8, 64, 1024];
    let mut total = 0;
    for graph in 0..100 {
        let dim = dims[graph % 3];
        let n = rng.gen_range(1..=5_000);
        let k = rng.gen_range(1..=50);
        let vectors: Vec<Vec<f32>> = (0..n).map(|_| random_unit(&mut rng, dim)).collect();
        let mut idx: VectorIndex<u32> = VectorIndex::new(dim);
        for (i, v) in vectors.iter().enumerate() {
            idx.upsert(i as u32, v);
        }
        let q = random_unit(&mut rng, dim);
        let mut scan: Vec<(f64, u32)> = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (v.iter().zip(&q).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum(), i as u32))
            .collect();
        scan.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let want: BTreeSet<u32> = scan.iter().take(k).map(|s| s.1).collect();
        let got: BTreeSet<u32> = idx.search(&q, k).into_iter().map(|(id, _)| id).collect();
        ensure(got == want, || format!("graph {graph} (n={n}, dim={dim}, k={k}) differs"))?;
        total += n;
    }
    Ok(format!("100 graphs, {total} vectors"))
}

// ---- label propagation ------------------------------------------------------------------

fn partition_of(nodes: &[NodeId], communities: &[BTreeSet<NodeId>]) -> Vec<BTreeSet<usize>> {
    let pos: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut out: Vec<BTreeSet<usize>> = communities.iter().map(|c| c.iter().map(|n| pos[n]).collect()).collect();
    out.sort();
    out
}

fn label_propagation() -> Result<String, String> {
    let g = test_graph(64, 1);
    let nodes = graph_from_edges(&g, 8, &barbell_edges());
    let barbell = partition_of(&nodes, &g.detect_communities());
    let want: Vec<BTreeSet<usize>> = vec![(0..4).collect(), (4..8).collect()];
    ensure(barbell == want, || format!("barbell: {barbell:?}"))?;

    for k in 1..=6 {
        let edges = disjoint_cliques(k, 5);
        let g = test_graph(64, k as u64);
        let nodes = graph_from_edges(&g, k * 5, &edges);
        let got = partition_of(&nodes, &g.detect_communities());
        let oracle = components(k * 5, &edges);
        ensure(got == oracle && got.len() == k, || format!("{k} cliques: {got:?}"))?;
    }

    // Grow a graph with incremental assignments, then refresh.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    for trial in 0..5 {
        let n = 30 + trial * 10;
        let mut edges = disjoint_cliques(3, 6);
        for _ in 0..n {
            let a = rng.gen_range(0..n.max(18));
            let b = rng.gen_range(0..n.max(18));
            if a != b {
                edges.push((a, b));
            }
        }
        let total = edges.iter().map(|(a, b)| a.max(b) + 1).max().unwrap();
        let g = test_graph(64, 50 + trial as u64);
        let nodes = graph_from_edges(&g, total, &edges);
        for n in &nodes {
            g.extend_with_node(*n).map_err(|e| e.to_string())?;
        }
        g.refresh_communities().map_err(|e| e.to_string())?;
        let stored = tkg_core::community::stored_partition(&g.snapshot());
        let direct = g.detect_communities();
        ensure(stored == direct, || format!("trial {trial}: refreshed partition differs from a direct run"))?;
        let assigned = g.snapshot().entities().all(|e| e.community.is_some());
        ensure(assigned, || "entity left without a community after refresh".into())?;
        checked += 1;
    }
    Ok(format!("barbell 2 communities, k=1..6 cliques, {checked} refresh comparisons"))
}

// ---- rrf / mmr ----------------------------------------------------------------------------

fn rrf_mmr_targets() -> Result<String, String> {
    let fused = rrf(&[vec![1u32, 2, 3], vec![1, 3, 2]], 60.0);
    let top = fused[0];
    ensure(top.id == 1 && (top.score - 2.0 / 61.0).abs() <= 1e-12, || format!("rrf top {top:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for fixture in 0..100 {
        let n = rng.gen_range(1..40);
        let dim = [4, 16, 64][fixture % 3];
        let vecs: Vec<Vec<f32>> = (0..n).map(|_| random_unit(&mut rng, dim)).collect();
        let rel: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let candidates: Vec<(usize, f64, Option<&[f32]>)> =
            (0..n).map(|i| (i, rel[i], Some(vecs[i].as_slice()))).collect();
        let got = mmr(&candidates, 1.0);
        let mut want: Vec<usize> = (0..n).collect();
        want.sort_by(|a, b| rel[*b].total_cmp(&rel[*a]).then(a.cmp(b)));
        ensure(got == want, || format!("mmr fixture {fixture}: {got:?} vs {want:?}"))?;
    }
    Ok(format!("rrf {:.12} (2/61), 100 mmr fixtures", top.score))
}

// ---- context ------------------------------------------------------------------------------

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}.txt", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn context_fixtures() -> Vec<(&'static str, String)> {
    let entity = |name: &str, summary: &str| EntityNode {
        id: NodeId::new_random(),
        name: name.into(),
        summary: summary.into(),
        name_embedding: vec![1.0],
        community: None,
    };
    let opts = ContextOptions::default();
    let empty = build_context(Vec::<FactLine>::new(), &[], &[], opts);

    let alice = entity("Alice", "engineer");
    let single = build_context(
        [FactLine {
            fact: "Alice works at Acme",
            t_valid: Some(ymd(2020, 1, 1)),
            t_invalid: None,
        }],
        &[&alice],
        &[],
        opts,
    );

    let a = entity("Alice", "Alice is a software engineer who moved from Boston to Paris.");
    let b = entity("Bob", "Bob is Alice's colleague.");
    let c = CommunityNode {
        id: CommunityId::new_random(),
        name: "Alice, Bob, Paris".into(),
        summary: "Alice and Bob work together and met in Paris.".into(),
        name_embedding: vec![1.0],
        members: [a.id, b.id].into_iter().collect(),
    };
    let mixed = build_context(
        [
            FactLine {
                fact: "Alice lived in Boston",
                t_valid: Some(ymd(2020, 1, 1)),
                t_invalid: Some(ymd(2024, 1, 1)),
            },
            FactLine {
                fact: "Alice moved to Paris",
                t_valid: None,
                t_invalid: None,
            },
            FactLine {
                fact: "Bob met Alice at the Louvre",
                t_valid: Some(ts("2024-06-01T14:30:00Z")),
                t_invalid: Some(ts("2024-06-01T16:00:00Z")),
            },
        ],
        &[&a, &b],
        &[&c],
        opts,
    );
    vec![("empty", empty), ("single_fact", single), ("mixed", mixed)]
}

fn context_golden() -> Result<String, String> {
    let mut bytes = 0;
    for (name, rendered) in context_fixtures() {
        let want = golden(name);
        ensure(rendered == want, || format!("{name} differs:\n{rendered}\n---\n{want}"))?;
        bytes += want.len();
    }
    Ok(format!("3 fixtures, {bytes} bytes"))
}

// ---- determinism --------------------------------------------------------------------------

fn seeded_graph(dim: usize) -> Graph {
    let cfg = GraphConfig::default().with_dim(dim).with_seed(99);
    Graph::builder(cfg)
        .clock(Arc::new(ManualClock::new(ymd(2030, 1, 1), 250)))
        .in_memory()
        .unwrap()
}

/// Graph contents with ids replaced by names and episode positions.
fn canonical(g: &Graph) -> Vec<String> {
    let s = g.snapshot();
    let ep_pos: HashMap<_, _> = s.episodes().enumerate().map(|(i, e)| (e.id, i)).collect();
    let name = |n: NodeId| s.entity(n).map(|e| e.name.clone()).unwrap_or_default();
    let mut out: Vec<String> = s.entities().map(|e| format!("N|{}|{}", e.name, e.summary)).collect();
    out.extend(s.edges().map(|e| {
        let eps: Vec<usize> = e.episodes.iter().map(|x| ep_pos[x]).collect();
        format!(
            "E|{}|{}|{}|{}|{:?}|{:?}|{:?}|{:?}|{eps:?}",
            name(e.source),
            e.predicate,
            name(e.target),
            e.fact,
            e.t_created,
            e.t_expired,
            e.t_valid,
            e.t_invalid,
        )
    }));
    out.extend(s.episodic_edges().map(|l| format!("L|{}|{}", ep_pos[&l.episode], name(l.entity))));
    out.extend(s.communities().map(|c| {
        let members: BTreeSet<String> = c.members.iter().map(|m| name(*m)).collect();
        format!("C|{}|{}|{members:?}", c.name, c.summary)
    }));
    out.sort();
    out
}

fn responses(g: &Graph, queries: &[String]) -> String {
    queries
        .iter()
        .map(|q| {
            let mut r = g.retrieve(&Query::new(q.as_str()), &RerankConfig::default()).unwrap();
            r.timings = Default::default();
            serde_json::to_string(&r).unwrap()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Result<String, String> {
    let spec = TranscriptSpec {
        messages: 200,
        sessions: 2,
        planted: 20,
        seed: 31,
        ..Default::default()
    };
    let t = transcript(&spec);
    let mut queries: Vec<String> = t.planted.iter().map(|p| p.query.clone()).collect();
    queries.extend(["Who had lunch with whom?", "Alice", "dog"].map(String::from));
    let run = || {
        let g = seeded_graph(256);
        for ep in t.episodes(4) {
            g.ingest(ep).unwrap();
        }
        g.refresh_communities().unwrap();
        let records = serde_json::to_string(&g.snapshot().to_records()).unwrap();
        (canonical(&g), responses(&g, &queries), records)
    };
    let (a, ra, xa) = run();
    let (b, rb, xb) = run();
    ensure(a == b, || "graphs differ".into())?;
    ensure(ra == rb, || "search responses differ".into())?;
    ensure(xa == xb, || "store records differ".into())?;
    Ok(format!("{} graph items, {} queries, {} response bytes", a.len(), queries.len(), ra.len()))
}

// ---- latency ------------------------------------------------------------------------------

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank]
}

fn latency() -> Result<String, String> {
    let mut cfg = GraphConfig::default().with_seed(5);
    cfg.auto_refresh = false;
    let g = Graph::builder(cfg).in_memory().unwrap();
    let built = Instant::now();
    let queries = populate_bench_graph(&g, &BenchSpec::default()).map_err(|e| e.to_string())?;
    let build_secs = built.elapsed().as_secs_f64();
    let s = g.snapshot();
    ensure(s.entity_count() == 10_000 && s.edge_count() == 50_000, || "wrong bench graph size".into())?;
    drop(s);

    let rerank = RerankConfig::default();
    for q in queries.iter().take(10) {
        g.retrieve(&Query::new(q.as_str()), &rerank).unwrap();
    }
    let mut totals = Vec::with_capacity(queries.len());
    let mut max_tokens = 0;
    for q in &queries {
        let r = g.retrieve(&Query::new(q.as_str()), &rerank).unwrap();
        totals.push(r.timings.total_ms);
        max_tokens = max_tokens.max(r.context_tokens);
    }
    totals.sort_by(f64::total_cmp);
    let (p50, p95) = (percentile(&totals, 0.5), percentile(&totals, 0.95));
    let detail = format!(
        "p50 {p50:.1} ms, p95 {p95:.1} ms over {} queries, max context {max_tokens} tokens, graph built in {build_secs:.1}s",
        totals.len()
    );
    ensure(p95 < 100.0 && max_tokens <= 2_000, || detail.clone())?;
    Ok(detail)
}

// ---- end to end ---------------------------------------------------------------------------

fn end_to_end_recall() -> Result<String, String> {
    let t = transcript(&TranscriptSpec::default());
    let cfg = GraphConfig::default().with_seed(12);
    let g = Graph::builder(cfg)
        .clock(Arc::new(ManualClock::new(ymd(2030, 1, 1), 1_000)))
        .in_memory()
        .unwrap();
    for ep in t.episodes(13) {
        g.ingest(ep).map_err(|e| e.to_string())?;
    }
    let mut hits = 0;
    let mut misses = Vec::new();
    for p in &t.planted {
        let r = g.retrieve(&Query::new(p.query.as_str()), &RerankConfig::default()).unwrap();
        if r.context.lines().any(|l| l == p.line) {
            hits += 1;
        } else {
            misses.push(p.line.clone());
        }
    }
    let rate = hits as f64 / t.planted.len() as f64;
    let detail = format!(
        "{hits}/{} planted facts retrieved ({:.0}%), {} messages",
        t.planted.len(),
        rate * 100.0,
        t.messages.len()
    );
    ensure(rate >= 0.9, || format!("{detail}; missed {misses:?}"))?;
    Ok(detail)
}
