//! Seeded synthetic corpora: conversation transcripts with planted facts and
//! their expected context lines, and large random graphs for latency runs.

use std::collections::HashSet;

use chrono::Datelike;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbedError;
use crate::engine::Graph;
use crate::graph::{EntityNode, Episode, SemanticEdge, StoreError};
use crate::ids::{EpisodeId, IdGen, NodeId};
use crate::time::Timestamp;

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ra", "ven", "dor", "sil", "tha", "zen", "bel", "cor", "dra", "fin", "gal", "hal", "isk", "jor",
    "kel", "lum", "nor", "pel", "rin", "sor", "tav", "ul", "vor", "wyn", "yel", "bri", "cas", "eld", "fen", "gor",
    "hest", "ix", "mur", "ost", "pry", "quil", "tor",
];

const SPEAKERS: &[&str] = &[
    "Alice", "Bruno", "Chiara", "Dmitri", "Esme", "Farid", "Greta", "Hiro", "Ines", "Jonas", "Kamala", "Lukas",
];

const ORG_SUFFIXES: &[&str] = &["Labs", "Systems", "Dynamics", "Partners", "Robotics", "Analytics"];

const MONTH_NAMES: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December",
];

const FILLER: &[&str] = &[
    "haha, that is great to hear.",
    "what are you up to this weekend?",
    "I am a bit tired today.",
    "sounds good to me.",
    "did anyone watch the game last night?",
    "I think we should order food.",
    "that makes sense, thanks.",
    "no worries at all.",
    "how was your day?",
    "I could use a coffee right now.",
    "the weather has been strange lately.",
    "agreed, let us do that.",
    "ok, talk soon.",
    "I need to finish a report before dinner.",
    "yeah, same here.",
    "that is hilarious.",
];

/// Makes pronounceable capitalized words that no other call has returned.
#[derive(Debug)]
pub struct NameGen {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl NameGen {
    pub fn new(seed: u64) -> Self {
        NameGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            used: SPEAKERS.iter().map(|s| s.to_lowercase()).collect(),
        }
    }

    pub fn word(&mut self) -> String {
        loop {
            let n = self.rng.gen_range(2..=3);
            let w: String = (0..n).map(|_| *SYLLABLES.choose(&mut self.rng).unwrap()).collect();
            if w.len() >= 5 && self.used.insert(w.clone()) {
                let mut c = w.chars();
                let first = c.next().unwrap().to_uppercase();
                return first.chain(c).collect();
            }
        }
    }
}

// ---- transcripts ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub actor: String,
    pub content: String,
    pub timestamp: Timestamp,
    pub session: usize,
}

impl Message {
    pub fn to_episode(&self, id: EpisodeId) -> Episode {
        Episode::message(&self.actor, &self.content, self.timestamp).with_id(id)
    }
}

/// A fact stated once in the transcript, with the line retrieval should
/// produce for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedFact {
    pub message: usize,
    pub subject: String,
    pub fact: String,
    pub t_valid: Option<Timestamp>,
    pub t_invalid: Option<Timestamp>,
    /// `fact (Date range: from - to)` as it should appear in a context.
    pub line: String,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSpec {
    pub messages: usize,
    pub sessions: usize,
    pub planted: usize,
    /// Share of non-planted messages that state a throwaway fact about two
    /// participants; the rest are small talk.
    pub distractor_rate: f64,
    pub seed: u64,
    pub start: Timestamp,
}

impl Default for TranscriptSpec {
    fn default() -> Self {
        TranscriptSpec {
            messages: 500,
            sessions: 5,
            planted: 50,
            distractor_rate: 0.2,
            seed: 7,
            start: Timestamp::from_ymd(2024, 3, 4).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub messages: Vec<Message>,
    pub planted: Vec<PlantedFact>,
}

impl Transcript {
    /// Episodes with ids drawn from a seeded generator, so two calls with
    /// the same seed produce identical episodes.
    pub fn episodes(&self, seed: u64) -> Vec<Episode> {
        let mut ids = IdGen::seeded(seed);
        self.messages.iter().map(|m| m.to_episode(ids.next())).collect()
    }
}

fn expected_line(fact: &str, from: Option<Timestamp>, to: Option<Timestamp>) -> String {
    let from = from.map_or_else(|| "unknown".to_string(), Timestamp::to_display_date);
    let to = to.map_or_else(|| "present".to_string(), Timestamp::to_display_date);
    format!("{fact} (Date range: {from} - {to})")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FactKind {
    Work,
    Home,
    Study,
    Pet,
    Trip,
}

const FACT_KINDS: [FactKind; 5] = [FactKind::Work, FactKind::Home, FactKind::Study, FactKind::Pet, FactKind::Trip];

/// Builds the statement, the third-person fact text, the validity interval
/// and a question for one planted fact.
fn plant(
    kind: FactKind,
    speaker: &str,
    t_ref: Timestamp,
    names: &mut NameGen,
    rng: &mut ChaCha8Rng,
) -> (String, String, Option<Timestamp>, Option<Timestamp>, String) {
    match kind {
        FactKind::Work => {
            let org = format!("{} {}", names.word(), ORG_SUFFIXES.choose(rng).unwrap());
            (
                format!("I work at {org}."),
                format!("{speaker} works at {org}"),
                Some(t_ref),
                None,
                format!("Where does {speaker} work?"),
            )
        }
        FactKind::Home => {
            let city = names.word();
            (
                format!("I live in {city}."),
                format!("{speaker} lives in {city}"),
                Some(t_ref),
                None,
                format!("Where does {speaker} live?"),
            )
        }
        FactKind::Study => {
            let school = format!("{} University", names.word());
            let from = rng.gen_range(1995..2015);
            let to = from + rng.gen_range(2..6);
            (
                format!("I studied at {school} from {from} to {to}."),
                format!("{speaker} studied at {school} from {from} to {to}"),
                Timestamp::from_ymd(from, 1, 1),
                Timestamp::from_ymd(to, 1, 1),
                format!("Where did {speaker} study?"),
            )
        }
        FactKind::Pet => {
            let pet = names.word();
            let month = rng.gen_range(1..=12u32);
            let year = t_ref.to_datetime().year() - rng.gen_range(1..6);
            let month_name = MONTH_NAMES[month as usize - 1];
            (
                format!("I adopted a dog named {pet} in {month_name} {year}."),
                format!("{speaker} adopted a dog named {pet} in {month_name} {year}"),
                Timestamp::from_ymd(year, month, 1),
                None,
                format!("What dog did {speaker} adopt?"),
            )
        }
        FactKind::Trip => {
            let place = names.word();
            (
                format!("I visited {place} last year."),
                format!("{speaker} visited {place} last year"),
                Timestamp::from_ymd(t_ref.to_datetime().year() - 1, 1, 1),
                None,
                format!("Which place did {speaker} visit?"),
            )
        }
    }
}

/// Generates a multi-session group chat. Each planted fact is a distinct
/// (speaker, kind) pair so no planted fact contradicts another.
pub fn transcript(spec: &TranscriptSpec) -> Transcript {
    assert!(spec.sessions > 0, "at least one session");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut names = NameGen::new(spec.seed ^ 0x5eed);
    let slots: Vec<(usize, FactKind)> = (0..SPEAKERS.len())
        .flat_map(|s| FACT_KINDS.iter().map(move |k| (s, *k)))
        .collect();
    assert!(spec.planted <= slots.len(), "at most {} planted facts", slots.len());
    assert!(spec.planted <= spec.messages, "more planted facts than messages");
    let mut slots = slots;
    slots.shuffle(&mut rng);
    slots.truncate(spec.planted);
    let mut positions: Vec<usize> = rand::seq::index::sample(&mut rng, spec.messages, spec.planted).into_vec();
    positions.sort_unstable();
    let mut planted_at: Vec<Option<(usize, FactKind)>> = vec![None; spec.messages];
    for (pos, slot) in positions.iter().zip(&slots) {
        planted_at[*pos] = Some(*slot);
    }

    let per_session = spec.messages.div_ceil(spec.sessions);
    let mut messages = Vec::with_capacity(spec.messages);
    let mut planted = Vec::with_capacity(spec.planted);
    for (i, slot) in planted_at.into_iter().enumerate() {
        let session = i / per_session;
        let t = Timestamp::from_millis(
            spec.start.as_millis()
                + session as i64 * 7 * 86_400_000
                + 9 * 3_600_000
                + (i % per_session) as i64 * 90_000,
        );
        let (actor, content) = match slot {
            Some((s, kind)) => {
                let speaker = SPEAKERS[s];
                let (content, fact, from, to, query) = plant(kind, speaker, t, &mut names, &mut rng);
                planted.push(PlantedFact {
                    message: i,
                    subject: speaker.to_string(),
                    line: expected_line(&fact, from, to),
                    fact,
                    t_valid: from,
                    t_invalid: to,
                    query,
                });
                (speaker.to_string(), content)
            }
            None => {
                let speaker = *SPEAKERS.choose(&mut rng).unwrap();
                let content = if rng.gen_bool(spec.distractor_rate) {
                    let other = *SPEAKERS.iter().filter(|o| **o != speaker).collect::<Vec<_>>().choose(&mut rng).unwrap();
                    if rng.gen_bool(0.5) {
                        format!("I had lunch with {other} today.")
                    } else {
                        format!("I called {other} yesterday.")
                    }
                } else {
                    FILLER.choose(&mut rng).unwrap().to_string()
                };
                (speaker.to_string(), content)
            }
        };
        messages.push(Message {
            actor,
            content,
            timestamp: t,
            session,
        });
    }
    Transcript { messages, planted }
}

// ---- bench graphs ----------------------------------------------------------------------

const ROLES: &[&str] = &[
    "botanist", "engineer", "violinist", "cartographer", "chef", "pilot", "archivist", "geologist", "teacher",
    "designer", "nurse", "economist",
];

const RELATIONS: &[(&str, &str)] = &[
    ("WORKS_WITH", "works with"),
    ("REPORTS_TO", "reports to"),
    ("LIVES_NEAR", "lives near"),
    ("MENTORED", "mentored"),
    ("INVESTED_IN", "invested in"),
    ("MARRIED", "married"),
    ("COMPETES_WITH", "competes with"),
    ("FOUNDED", "co-founded a company with"),
    ("STUDIED_WITH", "studied with"),
    ("VISITED", "visited"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub entities: usize,
    pub edges: usize,
    /// Source episodes the entities and facts are attributed to.
    pub episodes: usize,
    pub queries: usize,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            entities: 10_000,
            edges: 50_000,
            episodes: 1_000,
            queries: 200,
            seed: 11,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

/// Fills `graph` with random entities and facts without running extraction
/// and returns query texts about them.
pub fn populate_bench_graph(graph: &Graph, spec: &BenchSpec) -> Result<Vec<String>, SynthError> {
    assert!(spec.entities >= 2 && spec.episodes >= 1, "bench graph needs two entities and an episode");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut names = NameGen::new(spec.seed ^ 0xbe7c);
    let mut ids = IdGen::seeded(spec.seed);
    let embedder = graph.embedder();
    let base = Timestamp::from_ymd(2015, 1, 1).expect("valid date");
    let day = 86_400_000i64;

    let places: Vec<String> = (0..64).map(|_| names.word()).collect();
    let mut episodes = Vec::with_capacity(spec.episodes);
    for i in 0..spec.episodes {
        let t = Timestamp::from_millis(base.as_millis() + i as i64 * day);
        let ep = Episode::text(format!("Imported record batch {i}."), t).with_id(ids.next());
        episodes.push(graph.add_episode(ep)?);
    }

    let mut entity_names = Vec::with_capacity(spec.entities);
    let mut node_ids: Vec<NodeId> = Vec::with_capacity(spec.entities);
    let mut home = Vec::with_capacity(spec.entities);
    for _ in 0..spec.entities {
        let name = format!("{} {}", names.word(), names.word());
        let summary = format!(
            "{name} is a {} from {}.",
            ROLES.choose(&mut rng).unwrap(),
            places.choose(&mut rng).unwrap()
        );
        let id: NodeId = ids.next();
        graph.upsert_entity(EntityNode {
            id,
            name_embedding: embedder.embed(&name)?,
            name: name.clone(),
            summary,
            community: None,
        })?;
        let ep = *episodes.choose(&mut rng).unwrap();
        graph.link_episode(ep, id)?;
        entity_names.push(name);
        node_ids.push(id);
        home.push(ep);
    }

    for _ in 0..spec.edges {
        let a = rng.gen_range(0..spec.entities);
        let mut b = rng.gen_range(0..spec.entities - 1);
        if b >= a {
            b += 1;
        }
        let (predicate, phrase) = *RELATIONS.choose(&mut rng).unwrap();
        let fact = format!("{} {phrase} {}", entity_names[a], entity_names[b]);
        let start = base.as_millis() + rng.gen_range(0..3_000) * day;
        let t_valid = rng.gen_bool(0.8).then(|| Timestamp::from_millis(start));
        let t_invalid = (t_valid.is_some() && rng.gen_bool(0.2))
            .then(|| Timestamp::from_millis(start + rng.gen_range(1..1_000) * day));
        let t_created = Timestamp::from_millis(base.as_millis() + rng.gen_range(0..3_000) * day);
        graph.upsert_edge(SemanticEdge {
            id: ids.next(),
            source: node_ids[a],
            target: node_ids[b],
            predicate: predicate.to_string(),
            fact_embedding: embedder.embed(&fact)?,
            fact,
            fact_group: None,
            t_created,
            t_expired: t_invalid.map(|_| Timestamp::from_millis(t_created.as_millis() + day)),
            t_valid,
            t_invalid,
            episodes: vec![home[a]],
        })?;
    }

    let queries = (0..spec.queries)
        .map(|i| {
            let n = &entity_names[rng.gen_range(0..spec.entities)];
            let (_, phrase) = RELATIONS[i % RELATIONS.len()];
            match i % 3 {
                0 => format!("Who {phrase} {n}?"),
                1 => format!("What do we know about {n}?"),
                _ => format!("{} from {}", ROLES.choose(&mut rng).unwrap(), places.choose(&mut rng).unwrap()),
            }
        })
        .collect();
    Ok(queries)
}
