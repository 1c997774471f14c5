#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tkg_core::graph::SemanticEdge;
use tkg_core::{EntityNode, Episode, Graph, GraphConfig, IdGen, ManualClock, NodeId, Timestamp};

pub fn ts(s: &str) -> Timestamp {
    Timestamp::parse(s).unwrap()
}

pub fn ymd(y: i32, m: u32, d: u32) -> Timestamp {
    Timestamp::from_ymd(y, m, d).unwrap()
}

/// Small seeded graph with a deterministic clock and no automatic refresh.
pub fn test_graph(dim: usize, seed: u64) -> Graph {
    let mut cfg = GraphConfig::default().with_dim(dim).with_seed(seed);
    cfg.auto_refresh = false;
    Graph::builder(cfg)
        .clock(Arc::new(ManualClock::new(ymd(2030, 1, 1), 1_000)))
        .in_memory()
        .unwrap()
}

pub fn msg(actor: &str, content: &str, t_ref: Timestamp, ids: &mut IdGen) -> Episode {
    Episode::message(actor, content, t_ref).with_id(ids.next())
}

pub fn edge_by_fact<'a>(edges: &'a [SemanticEdge], needle: &str) -> &'a SemanticEdge {
    let found: Vec<&SemanticEdge> = edges.iter().filter(|e| e.fact.contains(needle)).collect();
    assert_eq!(found.len(), 1, "expected one edge containing {needle:?}, got {found:?}");
    found[0]
}

pub fn all_edges(g: &Graph) -> Vec<SemanticEdge> {
    g.snapshot().edges().cloned().collect()
}

/// Entities `N0..Nn` joined by the given undirected edges, inserted
/// directly without extraction.
pub fn graph_from_edges(g: &Graph, n: usize, edges: &[(usize, usize)]) -> Vec<NodeId> {
    let mut ids = IdGen::seeded(n as u64 * 7919 + edges.len() as u64);
    let ep = g
        .add_episode(Episode::text("fixture", ymd(2024, 1, 1)).with_id(ids.next()))
        .unwrap();
    let nodes: Vec<NodeId> = (0..n)
        .map(|i| {
            let name = format!("N{i}");
            g.upsert_entity(EntityNode {
                id: ids.next(),
                name_embedding: g.embedder().embed(&name).unwrap(),
                summary: format!("{name} is fixture node {i}."),
                name,
                community: None,
            })
            .unwrap()
        })
        .collect();
    for (a, b) in edges {
        let fact = format!("N{a} knows N{b}");
        g.upsert_edge(SemanticEdge {
            id: ids.next(),
            source: nodes[*a],
            target: nodes[*b],
            predicate: "KNOWS".into(),
            fact_embedding: g.embedder().embed(&fact).unwrap(),
            fact,
            fact_group: None,
            t_created: ymd(2024, 1, 1),
            t_expired: None,
            t_valid: None,
            t_invalid: None,
            episodes: vec![ep],
        })
        .unwrap();
    }
    nodes
}

/// Two 4-cliques `0..4` and `4..8` joined by the bridge 3–4.
pub fn barbell_edges() -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for base in [0, 4] {
        for i in 0..4 {
            for j in i + 1..4 {
                e.push((base + i, base + j));
            }
        }
    }
    e.push((3, 4));
    e
}

pub fn disjoint_cliques(k: usize, size: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for c in 0..k {
        for i in 0..size {
            for j in i + 1..size {
                e.push((c * size + i, c * size + j));
            }
        }
    }
    e
}

/// Connected components by union-find over node indices.
pub fn components(n: usize, edges: &[(usize, usize)]) -> Vec<BTreeSet<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, *a), find(&mut parent, *b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().insert(i);
    }
    let mut out: Vec<BTreeSet<usize>> = groups.into_values().collect();
    out.sort();
    out
}

/// Brute-force Okapi BM25 over whole documents: `k1 = 1.2`, `b = 0.75`,
/// idf `ln((N - df + 0.5) / (df + 0.5) + 1)`. Terms are lowercase runs of
/// letters, digits and apostrophes.
pub fn bm25_oracle(docs: &[&str], query: &str) -> Vec<f64> {
    fn terms(s: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for ch in s.chars() {
            if ch.is_alphanumeric() || (ch == '\'' && !cur.is_empty()) {
                cur.extend(ch.to_lowercase());
            } else if !cur.is_empty() {
                out.push(std::mem::take(&mut cur).trim_end_matches('\'').to_string());
            }
        }
        if !cur.is_empty() {
            out.push(cur.trim_end_matches('\'').to_string());
        }
        out
    }
    let (k1, b) = (1.2f64, 0.75f64);
    let tokenized: Vec<Vec<String>> = docs.iter().map(|d| terms(d)).collect();
    let n = docs.len() as f64;
    let avgdl = tokenized.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut q: Vec<String> = terms(query);
    q.sort();
    q.dedup();
    tokenized
        .iter()
        .map(|doc| {
            let len = doc.len() as f64;
            q.iter()
                .map(|t| {
                    let df = tokenized.iter().filter(|d| d.contains(t)).count() as f64;
                    let tf = doc.iter().filter(|w| *w == t).count() as f64;
                    if tf == 0.0 {
                        return 0.0;
                    }
                    let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl))
                })
                .sum()
        })
        .collect()
}

pub const CITIES: &[&str] = &["Boston", "Paris", "Lisbon", "Denver", "Osaka", "Nairobi"];
pub const ORGS: &[&str] = &["Acme Corp", "Globex", "Initech", "Umbrella Labs", "Hooli"];
pub const PEOPLE: &[&str] = &["Alice", "Bob", "Carol", "Dave"];
const MONTHS: &[&str] = &["January", "March", "June", "September", "November"];

/// Random episodes that keep moving people between cities and employers,
/// with absolute, relative, ranged and missing dates, in non-decreasing
/// reference time.
pub fn random_episodes(seed: u64, n: usize) -> Vec<Episode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = IdGen::seeded(seed ^ 0xe915);
    let mut t = ymd(2019, 1, 1).as_millis();
    (0..n)
        .map(|_| {
            t += rng.gen_range(1..60) * 86_400_000 + rng.gen_range(0..86_400_000);
            let speaker = *PEOPLE.choose(&mut rng).unwrap();
            let other = *PEOPLE.iter().filter(|p| **p != speaker).collect::<Vec<_>>().choose(&mut rng).unwrap();
            let city = CITIES.choose(&mut rng).unwrap();
            let org = ORGS.choose(&mut rng).unwrap();
            let year = rng.gen_range(2012..2027);
            let month = MONTHS.choose(&mut rng).unwrap();
            let content = match rng.gen_range(0..12) {
                0 => format!("I live in {city}."),
                1 => format!("I moved to {city} in {year}."),
                2 => format!("I moved to {city} in {month} {year}."),
                3 => format!("I moved to {city}."),
                4 => format!("I lived in {city} from {} to {}.", year - 3, year),
                5 => format!("I work at {org}."),
                6 => format!("I worked at {org} until {year}."),
                7 => format!("I started working at {org} two years ago."),
                8 => format!("{other} works at {org}."),
                9 => format!("I had lunch with {other} yesterday."),
                10 => format!("I moved to {city} three months ago."),
                _ => "sounds good, talk later.".to_string(),
            };
            Episode::message(speaker, content, Timestamp::from_millis(t)).with_id(ids.next())
        })
        .collect()
}

/// Like [`test_graph`] with a custom extractor and community settings.
pub fn graph_with(
    extractor: Arc<dyn tkg_core::Extractor>,
    tune: impl FnOnce(&mut GraphConfig),
) -> Graph {
    let mut cfg = GraphConfig::default().with_dim(128).with_seed(8);
    cfg.auto_refresh = false;
    tune(&mut cfg);
    Graph::builder(cfg)
        .extractor(extractor)
        .clock(Arc::new(ManualClock::new(ymd(2030, 1, 1), 1_000)))
        .in_memory()
        .unwrap()
}
