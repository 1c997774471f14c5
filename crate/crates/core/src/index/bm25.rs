use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Okapi BM25 over one field class (fact text, entity names, ...).
///
/// Postings are kept ordered by document id. Corpus statistics (document
/// count, total length) are updated on every insert and removal.
#[derive(Debug, Clone)]
pub struct InvertedIndex<I> {
    params: Bm25Params,
    postings: HashMap<String, BTreeMap<I, u32>>,
    docs: HashMap<I, Doc>,
    total_len: u64,
}

#[derive(Debug, Clone)]
struct Doc {
    len: u32,
    terms: Vec<String>,
}

impl<I: Copy + Ord + Hash> Default for InvertedIndex<I> {
    fn default() -> Self {
        Self::new(Bm25Params::default())
    }
}

impl<I: Copy + Ord + Hash> InvertedIndex<I> {
    pub fn new(params: Bm25Params) -> Self {
        InvertedIndex {
            params,
            postings: HashMap::new(),
            docs: HashMap::new(),
            total_len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn contains(&self, id: I) -> bool {
        self.docs.contains_key(&id)
    }

    pub fn avgdl(&self) -> f64 {
        if self.docs.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.docs.len() as f64
        }
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, BTreeMap::len)
    }

    /// Indexes `text` under `id`, replacing any previous document.
    pub fn insert(&mut self, id: I, text: &str) {
        self.remove(id);
        let tokens = tokenize(text);
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.clone()).or_default() += 1;
        }
        for (term, count) in &tf {
            self.postings.entry(term.clone()).or_default().insert(id, *count);
        }
        self.total_len += tokens.len() as u64;
        self.docs.insert(
            id,
            Doc {
                len: tokens.len() as u32,
                terms: tf.into_keys().collect(),
            },
        );
    }

    pub fn remove(&mut self, id: I) -> bool {
        let Some(doc) = self.docs.remove(&id) else {
            return false;
        };
        for term in &doc.terms {
            if let Some(list) = self.postings.get_mut(term) {
                list.remove(&id);
                if list.is_empty() {
                    self.postings.remove(term);
                }
            }
        }
        self.total_len -= u64::from(doc.len);
        true
    }

    /// Top `limit` documents by BM25 score, ties broken by ascending id.
    /// Repeated query terms count once.
    pub fn search(&self, query: &str, limit: usize) -> Vec<(I, f64)> {
        if limit == 0 || self.docs.is_empty() {
            return Vec::new();
        }
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let n = self.docs.len() as f64;
        let avgdl = self.avgdl();
        let Bm25Params { k1, b } = self.params;
        let mut scores: HashMap<I, f64> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let df = list.len() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            for (id, tf) in list {
                let dl = f64::from(self.docs[id].len);
                let tf = f64::from(*tf);
                let norm = if avgdl > 0.0 { dl / avgdl } else { 0.0 };
                let s = idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
                *scores.entry(*id).or_default() += s;
            }
        }
        let mut out: Vec<(I, f64)> = scores.into_iter().collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.truncate(limit);
        out
    }
}
