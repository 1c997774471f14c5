//! Rule-based [`Extractor`] used in tests, benchmarks and offline runs.
//!
//! Entities are the speaker plus capitalized proper-noun runs; facts come
//! from a small subject/verb/object grammar over the sentences of the
//! current message; dates come from regular expressions over the fact text.
//! Output depends only on the input, byte for byte.

use std::collections::{BTreeSet, HashMap};
use std::sync::LazyLock;

use parking_lot::Mutex;
use regex::Regex;

use super::{
    EdgeDescription, EntityCandidate, EntityPass, EntityResolution, EpisodeContext, ExtractedEntity, ExtractedFact,
    Extractor, ExtractorError, FactCandidate, FactResolution, TemporalAnnotation,
};
use crate::graph::{Episode, EpisodeKind};
use crate::ids::EdgeId;
use crate::time::Timestamp;

/// Extractor operations, for failure injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MockStage {
    ExtractEntities,
    ResolveEntity,
    ExtractFacts,
    ResolveFact,
    ExtractTemporal,
    DetectContradictions,
    Summarize,
    KeyTerms,
}

#[derive(Debug)]
pub struct MockExtractor {
    /// Also treat "A. Turing" / "Turing" as duplicates of "Alan Turing".
    pub token_subset_resolution: bool,
    pub summary_max_chars: usize,
    failures: Mutex<HashMap<MockStage, usize>>,
    calls: Mutex<HashMap<MockStage, usize>>,
}

impl Default for MockExtractor {
    fn default() -> Self {
        MockExtractor {
            token_subset_resolution: false,
            summary_max_chars: 320,
            failures: Mutex::new(HashMap::new()),
            calls: Mutex::new(HashMap::new()),
        }
    }
}

impl MockExtractor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_token_subset_resolution(mut self, on: bool) -> Self {
        self.token_subset_resolution = on;
        self
    }

    /// Makes every call to `stage` fail from now on.
    pub fn fail_at(&self, stage: MockStage) {
        self.failures.lock().insert(stage, 0);
    }

    /// Makes `stage` fail after `ok_calls` further successful calls.
    pub fn fail_after(&self, stage: MockStage, ok_calls: usize) {
        self.failures.lock().insert(stage, ok_calls);
    }

    pub fn clear_failures(&self) {
        self.failures.lock().clear();
    }

    pub fn calls(&self, stage: MockStage) -> usize {
        self.calls.lock().get(&stage).copied().unwrap_or(0)
    }

    fn enter(&self, stage: MockStage) -> Result<(), ExtractorError> {
        *self.calls.lock().entry(stage).or_default() += 1;
        let mut failures = self.failures.lock();
        if let Some(left) = failures.get_mut(&stage) {
            if *left == 0 {
                return Err(ExtractorError::Failed(format!("injected failure at {stage:?}")));
            }
            *left -= 1;
        }
        Ok(())
    }
}

// ---- word handling ----------------------------------------------------------

const SENTENCE_STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "before", "but", "can", "could", "did",
    "do", "does", "during", "every", "for", "from", "good", "great", "had", "has", "have", "he", "hello", "her", "here",
    "hey", "hi", "his", "how", "i", "if", "in", "is", "it", "its", "just", "last", "let", "maybe", "me", "most", "my",
    "next", "nice", "no", "not", "of", "oh", "ok", "okay", "on", "once", "our", "please", "really", "she", "should",
    "since", "so", "some", "sounds", "sure", "thank", "thanks", "that", "the", "their", "them", "then", "there", "these",
    "they", "this", "those", "to", "today", "tomorrow", "us", "was", "we", "well", "were", "what", "when", "where",
    "which", "who", "why", "will", "with", "wow", "would", "yeah", "yes", "yesterday", "you", "your",
];

const TEMPORAL_WORDS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october", "november",
    "december", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday", "jan", "feb", "mar",
    "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
];

const ADVERBS: &[&str] = &[
    "just", "also", "still", "really", "recently", "finally", "always", "never", "often", "usually", "actually",
    "already", "currently", "now", "sometimes", "mostly",
];

const IRREGULAR_PAST: &[&str] = &[
    "was", "were", "had", "did", "went", "met", "saw", "bought", "sold", "built", "began", "became", "got", "made",
    "took", "gave", "found", "left", "wrote", "ran", "won", "lost", "knew", "thought", "told", "said", "came", "kept",
    "felt", "taught", "caught", "drove", "flew", "grew", "spent", "sent", "held", "led", "paid", "brought", "fell",
    "ate", "drank", "sang", "swam", "rode", "chose", "spoke", "broke", "wore", "heard", "read", "put", "set", "won",
];

const MODALS: &[&str] = &["can", "could", "will", "would", "shall", "should", "might", "must", "may"];

const GAP_DROP: &[&str] = &[
    "a", "an", "the", "and", "or", "has", "have", "had", "been", "just", "also", "recently", "finally", "still",
    "really", "currently", "now", "always", "never", "actually", "already", "ago", "since", "until", "till",
];

fn is_stopword(w: &str) -> bool {
    SENTENCE_STOPWORDS.contains(&w.to_lowercase().as_str())
}

fn is_temporal_word(w: &str) -> bool {
    TEMPORAL_WORDS.contains(&w.to_lowercase().trim_end_matches('.'))
}

fn is_first_person(core: &str) -> bool {
    matches!(core, "I" | "I'm" | "I've" | "I'd" | "I'll")
}

#[derive(Debug, Clone)]
struct Word {
    raw: String,
    core: String,
    /// Clause punctuation (`,` `;` `:` ...) follows the word.
    breaks: bool,
}

fn normalize_quotes(s: &str) -> String {
    s.replace(['\u{2019}', '\u{2018}'], "'")
}

fn split_words(sentence: &str) -> Vec<Word> {
    sentence
        .split_whitespace()
        .map(|raw| {
            let raw = raw.to_string();
            let trimmed_start = raw.trim_start_matches(|c: char| !c.is_alphanumeric());
            let mut core = trimmed_start.trim_end_matches(|c: char| !c.is_alphanumeric()).to_string();
            let tail = &trimmed_start[core.len()..];
            // keep the period of an initial such as "A."
            if core.chars().count() == 1 && core.chars().all(char::is_uppercase) && tail.starts_with('.') {
                core.push('.');
            }
            let breaks = tail.chars().any(|c| matches!(c, ',' | ';' | ':' | '(' | ')' | '"'));
            Word { raw, core, breaks }
        })
        .filter(|w| !w.core.is_empty())
        .collect()
}

fn split_sentences(text: &str) -> Vec<String> {
    let text = normalize_quotes(text);
    let mut out = Vec::new();
    for line in text.lines() {
        let mut current = String::new();
        let tokens: Vec<&str> = line.split_whitespace().collect();
        for (i, tok) in tokens.iter().enumerate() {
            if !current.is_empty() {
                current.push(' ');
            }
            current.push_str(tok);
            let ends = tok.ends_with(['.', '!', '?']);
            let stem = tok.trim_end_matches(['.', '!', '?', '"', '\'']);
            let initial = stem.chars().count() == 1 && stem.chars().all(char::is_uppercase);
            let abbrev = matches!(stem, "Mr" | "Mrs" | "Ms" | "Dr" | "St" | "Jr" | "Sr");
            if ends && !initial && !abbrev && i + 1 < tokens.len() {
                out.push(std::mem::take(&mut current));
            }
        }
        if !current.trim().is_empty() {
            out.push(current);
        }
    }
    out
}

fn is_capitalized(core: &str) -> bool {
    core.chars().next().is_some_and(char::is_uppercase)
}

fn strip_possessive(s: &str) -> &str {
    s.strip_suffix("'s").unwrap_or(s)
}

/// Proper-noun runs in one sentence: `(start index, words)`.
fn capitalized_runs(words: &[Word]) -> Vec<(usize, Vec<String>)> {
    let mut runs = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut start = 0;
    let flush = |current: &mut Vec<String>, start: usize, runs: &mut Vec<(usize, Vec<String>)>| {
        if !current.is_empty() {
            runs.push((start, std::mem::take(current)));
        }
    };
    for (i, w) in words.iter().enumerate() {
        let core = w.core.as_str();
        let joinable = is_capitalized(core) && !is_first_person(core) && !is_temporal_word(core);
        let connector = core == "of"
            && !current.is_empty()
            && words.get(i + 1).is_some_and(|n| is_capitalized(&n.core) && !is_temporal_word(&n.core));
        if joinable || connector {
            if current.is_empty() {
                start = i;
            }
            current.push(core.to_string());
            if strip_possessive(core) != core || w.breaks {
                flush(&mut current, start, &mut runs);
            }
        } else {
            flush(&mut current, start, &mut runs);
        }
    }
    flush(&mut current, start, &mut runs);
    runs
}

fn clean_name(words: &[String]) -> String {
    let mut name = words.join(" ");
    name = strip_possessive(&name).to_string();
    if name.ends_with('.') && !name.rsplit(' ').next().is_some_and(|w| w.len() == 2) {
        name.pop();
    }
    name
}

/// Rewrites first-person references to the speaker and conjugates the
/// verb that follows "I".
fn third_person(sentence: &str, speaker: Option<&str>) -> String {
    let Some(speaker) = speaker else {
        return sentence.trim().to_string();
    };
    let words = split_words(sentence);
    let mut out: Vec<String> = Vec::with_capacity(words.len());
    let mut conjugate_next = false;
    for w in &words {
        let core = w.core.as_str();
        let replacement = match core {
            "I" => {
                conjugate_next = true;
                Some(speaker.to_string())
            }
            "I'm" => Some(format!("{speaker} is")),
            "I've" => Some(format!("{speaker} has")),
            "I'd" => Some(format!("{speaker} would")),
            "I'll" => Some(format!("{speaker} will")),
            "my" | "My" | "mine" | "Mine" => Some(format!("{speaker}'s")),
            "me" | "Me" | "myself" | "Myself" => Some(speaker.to_string()),
            _ if conjugate_next => {
                let lower = core.to_lowercase();
                if ADVERBS.contains(&lower.as_str()) {
                    None
                } else {
                    conjugate_next = false;
                    Some(conjugate(core))
                }
            }
            _ => None,
        };
        match replacement {
            Some(r) => out.push(w.raw.replacen(core, &r, 1)),
            None => out.push(w.raw.clone()),
        }
    }
    out.join(" ")
}

fn conjugate(verb: &str) -> String {
    let lower = verb.to_lowercase();
    let irregular = match lower.as_str() {
        "am" => Some("is"),
        "have" => Some("has"),
        "do" => Some("does"),
        "go" => Some("goes"),
        "don't" => Some("doesn't"),
        "haven't" => Some("hasn't"),
        "were" => Some("was"),
        _ => None,
    };
    if let Some(v) = irregular {
        return v.to_string();
    }
    if IRREGULAR_PAST.contains(&lower.as_str())
        || MODALS.contains(&lower.as_str())
        || lower.ends_with("ed")
        || lower.contains('\'')
        || !lower.chars().all(char::is_alphabetic)
    {
        return verb.to_string();
    }
    let bytes = lower.as_bytes();
    let n = bytes.len();
    if lower.ends_with("sh") || lower.ends_with("ch") || lower.ends_with(['s', 'x', 'z', 'o']) {
        format!("{verb}es")
    } else if n >= 2 && lower.ends_with('y') && !matches!(bytes[n - 2], b'a' | b'e' | b'i' | b'o' | b'u') {
        format!("{}ies", &verb[..verb.len() - 1])
    } else {
        format!("{verb}s")
    }
}

fn crude_stem(w: &str) -> &str {
    for suffix in ["ing", "ed", "es", "s"] {
        if let Some(s) = w.strip_suffix(suffix) {
            if s.len() >= 3 {
                return s;
            }
        }
    }
    w
}

fn predicate_from(words: &[Word]) -> Option<String> {
    let kept: Vec<String> = words
        .iter()
        .map(|w| w.core.to_lowercase())
        .filter(|w| {
            !GAP_DROP.contains(&w.as_str())
                && !is_temporal_word(w)
                && !w.chars().all(|c| c.is_ascii_digit())
                && w.chars().any(char::is_alphabetic)
        })
        .collect();
    let first = kept.first()?;
    let second = kept.get(1).map(String::as_str);
    let stem = crude_stem(first);
    let canonical = match (stem, second) {
        ("work", Some("at" | "for") | None) => Some("WORKS_FOR"),
        ("live" | "liv", Some("in") | None) => Some("LIVES_IN"),
        ("move" | "mov" | "relocate" | "relocat", Some("to")) => Some("LIVES_IN"),
        _ => None,
    };
    if let Some(c) = canonical {
        return Some(c.to_string());
    }
    let label = kept
        .iter()
        .map(|w| w.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_uppercase())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join("_");
    (!label.is_empty()).then_some(label)
}

fn strip_trailing_punct(s: &str) -> String {
    s.trim().trim_end_matches(['.', '!', '?', ',', ';']).trim().to_string()
}

fn speaker_of(ep: &Episode) -> Option<&str> {
    match ep.kind {
        EpisodeKind::Message => ep.actor.as_deref(),
        _ => None,
    }
}

/// Locates entity mentions in a sentence: `(start, end, entity index)`,
/// first occurrence per entity, ordered by position.
fn find_mentions(words: &[Word], names: &[String]) -> Vec<(usize, usize, usize)> {
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(names[i].split_whitespace().count()));
    let lowered: Vec<String> = words.iter().map(|w| strip_possessive(&w.core).to_lowercase()).collect();
    let mut taken = vec![false; words.len()];
    let mut found = Vec::new();
    for i in order {
        let parts: Vec<String> = names[i]
            .split_whitespace()
            .map(|p| strip_possessive(p.trim_end_matches(',')).to_lowercase())
            .collect();
        if parts.is_empty() || parts.len() > words.len() {
            continue;
        }
        for start in 0..=words.len() - parts.len() {
            let end = start + parts.len();
            if taken[start..end].iter().any(|t| *t) {
                continue;
            }
            let hit = parts.iter().zip(&lowered[start..end]).all(|(p, w)| {
                p == w || p.trim_end_matches('.') == w.trim_end_matches('.')
            });
            if hit {
                taken[start..end].iter_mut().for_each(|t| *t = true);
                found.push((start, end, i));
                break;
            }
        }
    }
    found.sort();
    found
}

fn same_name(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

fn name_tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(|t| t.trim_end_matches('.').to_lowercase()).filter(|t| !t.is_empty()).collect()
}

/// "A. Turing" and "Turing" abbreviate "Alan Turing": every token of the
/// shorter name matches, in order, a token of the longer (exactly, or as an
/// initial) and the last tokens agree.
fn abbreviates(short: &str, long: &str) -> bool {
    let s = name_tokens(short);
    let l = name_tokens(long);
    if s.is_empty() || s.len() > l.len() || s == l || s.last() != l.last() {
        return false;
    }
    let mut j = 0;
    for tok in &s {
        let mut matched = false;
        while j < l.len() {
            let cand = &l[j];
            j += 1;
            if tok == cand || (tok.chars().count() == 1 && cand.starts_with(tok.as_str())) {
                matched = true;
                break;
            }
        }
        if !matched {
            return false;
        }
    }
    true
}

// ---- temporal ------------------------------------------------------------------

const MONTHS: &str = "january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sep|sept|oct|nov|dec";

static DATE: LazyLock<String> = LazyLock::new(|| {
    format!(
        r"(?:\d{{4}}-\d{{2}}-\d{{2}}|(?:{MONTHS})\.?\s+\d{{1,2}}(?:st|nd|rd|th)?,?\s+\d{{4}}|\d{{1,2}}(?:st|nd|rd|th)?\s+(?:{MONTHS})\.?,?\s+\d{{4}}|(?:{MONTHS})\.?\s+\d{{4}}|\b(?:1[0-9]|20)\d{{2}}\b)"
    )
});

static RANGE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"(?i)\b(?:from\s+({d})\s+(?:to|until|till)\s+({d})|between\s+({d})\s+and\s+({d}))", d = *DATE)).unwrap()
});
static UNTIL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?i)\b(?:until|till|through)\s+({})", *DATE)).unwrap());
static DATE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!("(?i){}", *DATE)).unwrap());
static AGO_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(\d+|an?|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|a couple of|a few)\s+(minute|hour|day|week|month|year)s?\s+ago\b").unwrap()
});
static LAST_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(yesterday|last\s+(?:week|month|year))\b").unwrap());

fn month_number(s: &str) -> Option<u32> {
    let s = s.to_lowercase();
    let s = s.trim_end_matches('.');
    let idx = [
        "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
    ]
    .iter()
    .position(|m| s.starts_with(m))?;
    Some(idx as u32 + 1)
}

/// Parses one match of the date pattern. Missing day → 1st, missing
/// month → January, time → midnight.
fn parse_date_expr(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(t) = Timestamp::parse(s) {
        return Some(t);
    }
    let parts: Vec<String> = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|p| !p.is_empty())
        .map(|p| p.to_string())
        .collect();
    let mut year = None;
    let mut month = None;
    let mut day = None;
    for p in &parts {
        let digits = p.trim_end_matches(|c: char| c.is_alphabetic());
        if let Some(m) = month_number(p).filter(|_| p.chars().next().is_some_and(char::is_alphabetic)) {
            month = Some(m);
        } else if digits.len() == 4 {
            year = digits.parse::<i32>().ok();
        } else if !digits.is_empty() && digits.len() <= 2 {
            day = digits.parse::<u32>().ok();
        }
    }
    Timestamp::from_ymd(year?, month.unwrap_or(1), day.unwrap_or(1))
}

fn number_word(s: &str) -> Option<i64> {
    let s = s.to_lowercase();
    let n = match s.as_str() {
        "a" | "an" | "one" => 1,
        "two" | "a couple of" => 2,
        "three" | "a few" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        "eleven" => 11,
        "twelve" => 12,
        other => return other.parse().ok(),
    };
    Some(n)
}

fn midnight(t: Timestamp) -> Timestamp {
    let ms = t.as_millis();
    Timestamp::from_millis(ms - ms.rem_euclid(86_400_000))
}

fn year_start(t: Timestamp, back: i32) -> Option<Timestamp> {
    use chrono::Datelike;
    Timestamp::from_ymd(t.to_datetime().year() - back, 1, 1)
}

/// Present tense when the word after the subject is a present-tense verb.
fn is_present_tense(fact: &str, subject: &str) -> bool {
    let words = split_words(fact);
    let names = [subject.to_string()];
    let Some(&(_, end, _)) = find_mentions(&words, &names).first() else {
        return false;
    };
    for w in &words[end..] {
        let lower = w.core.to_lowercase();
        if ADVERBS.contains(&lower.as_str()) {
            continue;
        }
        if matches!(lower.as_str(), "is" | "are" | "am" | "has" | "does" | "isn't" | "doesn't") {
            return true;
        }
        if IRREGULAR_PAST.contains(&lower.as_str()) || MODALS.contains(&lower.as_str()) || lower.ends_with("ed") {
            return false;
        }
        return lower.ends_with('s') && !lower.ends_with("ss");
    }
    false
}

fn temporal_for(fact: &str, subject: &str, reference: Timestamp) -> (Option<Timestamp>, Option<Timestamp>) {
    if let Some(c) = RANGE_RE.captures(fact) {
        let from = c.get(1).or(c.get(3)).and_then(|m| parse_date_expr(m.as_str()));
        let to = c.get(2).or(c.get(4)).and_then(|m| parse_date_expr(m.as_str()));
        return (from, to);
    }
    let mut rest = fact.to_string();
    let mut invalid = None;
    if let Some(c) = UNTIL_RE.captures(fact) {
        invalid = parse_date_expr(&c[1]);
        let span = c.get(0).unwrap().range();
        rest.replace_range(span, " ");
    }
    if let Some(c) = AGO_RE.captures(&rest) {
        if let Some(n) = number_word(&c[1]) {
            let valid = match c[2].to_lowercase().as_str() {
                "minute" => Timestamp::from_millis(reference.as_millis() - n * 60_000),
                "hour" => Timestamp::from_millis(reference.as_millis() - n * 3_600_000),
                "day" => reference.minus_days(n),
                "week" => reference.minus_days(7 * n),
                "month" => reference.minus_months(n),
                _ => reference.minus_months(12 * n),
            };
            return (Some(valid), invalid);
        }
    }
    if let Some(c) = LAST_RE.captures(&rest) {
        let phrase = c[1].to_lowercase();
        let valid = if phrase == "yesterday" {
            Some(midnight(reference).minus_days(1))
        } else if phrase.ends_with("week") {
            Some(reference.minus_days(7))
        } else if phrase.ends_with("month") {
            Some(reference.minus_months(1))
        } else {
            year_start(reference, 1)
        };
        return (valid, invalid);
    }
    if let Some(m) = DATE_RE.find(&rest) {
        if let Some(t) = parse_date_expr(m.as_str()) {
            return (Some(t), invalid);
        }
    }
    if is_present_tense(fact, subject) {
        return (Some(reference), invalid);
    }
    (None, invalid)
}

// ---- summaries -------------------------------------------------------------------

fn summarize_texts(texts: &[String], max_chars: usize) -> String {
    let mut seen = BTreeSet::new();
    let mut out = String::new();
    for text in texts {
        for sentence in split_sentences(text) {
            let sentence = sentence.trim().to_string();
            if sentence.is_empty() || !seen.insert(sentence.clone()) {
                continue;
            }
            let extra = if out.is_empty() { sentence.len() } else { sentence.len() + 1 };
            if out.len() + extra > max_chars {
                if out.is_empty() {
                    out = sentence.chars().take(max_chars).collect();
                }
                return out;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&sentence);
        }
    }
    out
}

fn key_terms_of(summary: &str) -> String {
    let mut counts: Vec<(String, usize, usize)> = Vec::new();
    for sentence in split_sentences(summary) {
        let words = split_words(&sentence);
        for (i, w) in words.iter().enumerate() {
            let core = strip_possessive(&w.core).trim_end_matches('.');
            if !is_capitalized(core) || is_stopword(core) || is_temporal_word(core) || (i == 0 && words.len() > 1 && is_stopword(core)) {
                continue;
            }
            match counts.iter_mut().find(|(t, _, _)| t == core) {
                Some(entry) => entry.1 += 1,
                None => {
                    let order = counts.len();
                    counts.push((core.to_string(), 1, order));
                }
            }
        }
    }
    if counts.is_empty() {
        let mut words: Vec<String> = summary.split_whitespace().map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_string()).collect();
        words.retain(|w| w.len() > 3);
        words.truncate(3);
        return words.join(", ");
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    counts.into_iter().take(3).map(|(t, _, _)| t).collect::<Vec<_>>().join(", ")
}

impl Extractor for MockExtractor {
    fn extract_entities(&self, ctx: &EpisodeContext, pass: EntityPass<'_>) -> Result<Vec<ExtractedEntity>, ExtractorError> {
        self.enter(MockStage::ExtractEntities)?;
        let speaker = speaker_of(&ctx.current);
        let mut out: Vec<ExtractedEntity> = Vec::new();
        let mut known: Vec<String> = match pass {
            EntityPass::Initial => Vec::new(),
            EntityPass::Reflection { found } => found.iter().map(|e| e.name.clone()).collect(),
        };
        if let (EntityPass::Initial, Some(s)) = (pass, speaker) {
            out.push(ExtractedEntity {
                name: s.to_string(),
                summary: format!("{s} is a participant in the conversation."),
            });
            known.push(s.to_string());
        }
        for sentence in split_sentences(&ctx.current.content) {
            let words = split_words(&sentence);
            let summary = strip_trailing_punct(&third_person(&sentence, speaker)) + ".";
            for (start, mut run) in capitalized_runs(&words) {
                let mut start = start;
                if start == 0 && is_stopword(&run[0]) {
                    run.remove(0);
                    start = 1;
                    if run.first().is_some_and(|w| w == "of") {
                        run.remove(0);
                    }
                }
                if run.is_empty() || (run.len() == 1 && is_stopword(&run[0])) {
                    continue;
                }
                let ambiguous = start == 0 && run.len() == 1;
                let wanted = match pass {
                    EntityPass::Initial => !ambiguous,
                    EntityPass::Reflection { .. } => ambiguous,
                };
                let name = clean_name(&run);
                if !wanted || name.is_empty() || known.iter().any(|k| same_name(k, &name)) {
                    continue;
                }
                known.push(name.clone());
                out.push(ExtractedEntity {
                    name,
                    summary: summary.clone(),
                });
            }
        }
        Ok(out)
    }

    fn resolve_entity(
        &self,
        _ctx: &EpisodeContext,
        candidates: &[EntityCandidate],
        new: &ExtractedEntity,
    ) -> Result<EntityResolution, ExtractorError> {
        self.enter(MockStage::ResolveEntity)?;
        if let Some(c) = candidates.iter().find(|c| same_name(&c.name, &new.name)) {
            return Ok(EntityResolution {
                is_duplicate: true,
                id: Some(c.id),
                name: Some(c.name.clone()),
            });
        }
        if self.token_subset_resolution {
            for c in candidates {
                if abbreviates(&new.name, &c.name) {
                    return Ok(EntityResolution {
                        is_duplicate: true,
                        id: Some(c.id),
                        name: Some(c.name.clone()),
                    });
                }
                if abbreviates(&c.name, &new.name) {
                    return Ok(EntityResolution {
                        is_duplicate: true,
                        id: Some(c.id),
                        name: Some(new.name.clone()),
                    });
                }
            }
        }
        Ok(EntityResolution::default())
    }

    fn extract_facts(&self, ctx: &EpisodeContext, entities: &[ExtractedEntity]) -> Result<Vec<ExtractedFact>, ExtractorError> {
        self.enter(MockStage::ExtractFacts)?;
        let speaker = speaker_of(&ctx.current);
        let names: Vec<String> = entities.iter().map(|e| e.name.clone()).collect();
        let mut facts = Vec::new();
        for sentence in split_sentences(&ctx.current.content) {
            let converted = third_person(&sentence, speaker);
            let words = split_words(&converted);
            let mentions = find_mentions(&words, &names);
            if mentions.len() < 2 {
                continue;
            }
            // Mentions separated only by commas or conjunctions form one group.
            let mut groups: Vec<Vec<(usize, usize, usize)>> = vec![vec![mentions[0]]];
            for m in &mentions[1..] {
                let prev_end = groups.last().unwrap().last().unwrap().1;
                let coordinated = words[prev_end..m.0]
                    .iter()
                    .all(|w| matches!(w.core.to_lowercase().as_str(), "and" | "or" | "&"));
                if coordinated {
                    groups.last_mut().unwrap().push(*m);
                } else {
                    groups.push(vec![*m]);
                }
            }
            let text = strip_trailing_punct(&converted);
            let mut emit = |s: usize, o: usize, predicate: &str| {
                if s != o {
                    facts.push(ExtractedFact {
                        source: names[s].clone(),
                        target: names[o].clone(),
                        predicate: predicate.to_string(),
                        fact: text.clone(),
                    });
                }
            };
            if groups.len() == 1 {
                let g = &groups[0];
                let tail = &words[g.last().unwrap().1..];
                let predicate = predicate_from(tail).unwrap_or_else(|| "RELATED_TO".to_string());
                for m in &g[1..] {
                    emit(g[0].2, m.2, &predicate);
                }
                continue;
            }
            let mut previous: Option<String> = None;
            for i in 1..groups.len() {
                let gap = &words[groups[i - 1].last().unwrap().1..groups[i][0].0];
                let predicate = predicate_from(gap)
                    .or_else(|| previous.clone())
                    .unwrap_or_else(|| "RELATED_TO".to_string());
                for s in &groups[0] {
                    for o in &groups[i] {
                        emit(s.2, o.2, &predicate);
                    }
                }
                previous = Some(predicate);
            }
        }
        Ok(facts)
    }

    fn resolve_fact(&self, existing: &[FactCandidate], new: &ExtractedFact) -> Result<FactResolution, ExtractorError> {
        self.enter(MockStage::ResolveFact)?;
        let norm = |s: &str| crate::text::tokenize(s).join(" ");
        let target = norm(&new.fact);
        Ok(existing
            .iter()
            .find(|c| c.predicate == new.predicate && norm(&c.fact) == target)
            .map(|c| FactResolution {
                is_duplicate: true,
                id: Some(c.id),
            })
            .unwrap_or_default())
    }

    fn extract_temporal(
        &self,
        _ctx: &EpisodeContext,
        reference: Timestamp,
        fact: &ExtractedFact,
    ) -> Result<TemporalAnnotation, ExtractorError> {
        self.enter(MockStage::ExtractTemporal)?;
        let (valid, invalid) = temporal_for(&fact.fact, &fact.source, reference);
        Ok(TemporalAnnotation {
            valid_at: valid.map(Timestamp::to_iso),
            invalid_at: invalid.map(Timestamp::to_iso),
        })
    }

    fn detect_contradictions(&self, new: &EdgeDescription, related: &[EdgeDescription]) -> Result<Vec<EdgeId>, ExtractorError> {
        self.enter(MockStage::DetectContradictions)?;
        Ok(related
            .iter()
            .filter(|r| r.id != new.id && r.predicate == new.predicate && r.source == new.source && r.target != new.target)
            .map(|r| r.id)
            .collect())
    }

    fn summarize(&self, texts: &[String]) -> Result<String, ExtractorError> {
        self.enter(MockStage::Summarize)?;
        Ok(summarize_texts(texts, self.summary_max_chars))
    }

    fn key_terms(&self, summary: &str) -> Result<String, ExtractorError> {
        self.enter(MockStage::KeyTerms)?;
        Ok(key_terms_of(summary))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(actor: &str, content: &str) -> EpisodeContext {
        EpisodeContext {
            current: Episode::message(actor, content, Timestamp::from_ymd(2024, 3, 15).unwrap()),
            previous: vec![],
        }
    }

    fn names(v: &[ExtractedEntity]) -> Vec<&str> {
        v.iter().map(|e| e.name.as_str()).collect()
    }

    #[test]
    fn speaker_and_proper_nouns() {
        let m = MockExtractor::new();
        let c = ctx("Alice", "I work at Acme Corp.");
        let ents = m.extract_entities(&c, EntityPass::Initial).unwrap();
        assert_eq!(names(&ents), ["Alice", "Acme Corp"]);
        assert_eq!(ents[1].summary, "Alice works at Acme Corp.");
        let more = m.extract_entities(&c, EntityPass::Reflection { found: &ents }).unwrap();
        assert!(more.is_empty());
    }

    #[test]
    fn reflection_recovers_sentence_initial_names() {
        let m = MockExtractor::new();
        let c = ctx("Bob", "Paris is lovely. The Louvre was packed in June.");
        let first = m.extract_entities(&c, EntityPass::Initial).unwrap();
        assert_eq!(names(&first), ["Bob", "Louvre"]);
        let second = m.extract_entities(&c, EntityPass::Reflection { found: &first }).unwrap();
        assert_eq!(names(&second), ["Paris"]);
    }

    #[test]
    fn no_entities_beyond_speaker() {
        let m = MockExtractor::new();
        let c = ctx("Alice", "sounds good, see you later!");
        let ents = m.extract_entities(&c, EntityPass::Initial).unwrap();
        assert_eq!(names(&ents), ["Alice"]);
        assert!(m.extract_facts(&c, &ents).unwrap().is_empty());
    }

    #[test]
    fn work_fact_grammar() {
        let m = MockExtractor::new();
        let c = ctx("Alice", "I work at Acme Corp");
        let ents = m.extract_entities(&c, EntityPass::Initial).unwrap();
        let facts = m.extract_facts(&c, &ents).unwrap();
        assert_eq!(
            facts,
            [ExtractedFact {
                source: "Alice".into(),
                target: "Acme Corp".into(),
                predicate: "WORKS_FOR".into(),
                fact: "Alice works at Acme Corp".into(),
            }]
        );
    }

    #[test]
    fn coordinated_subjects_share_fact_text() {
        let m = MockExtractor::new();
        let c = ctx("Dana", "Alice, Bob and Carol founded Initech.");
        let mut ents = m.extract_entities(&c, EntityPass::Initial).unwrap();
        let more = m.extract_entities(&c, EntityPass::Reflection { found: &ents }).unwrap();
        ents.extend(more);
        let facts = m.extract_facts(&c, &ents).unwrap();
        assert_eq!(facts.len(), 3);
        assert!(facts.iter().all(|f| f.predicate == "FOUNDED" && f.target == "Initech"));
        assert!(facts.iter().all(|f| f.fact == "Alice, Bob and Carol founded Initech"));
    }

    #[test]
    fn third_person_rewrites() {
        assert_eq!(third_person("I have lived in Boston since 2020.", Some("Alice")), "Alice has lived in Boston since 2020.");
        assert_eq!(third_person("I really like my job", Some("Al")), "Al really likes Al's job");
        assert_eq!(third_person("I'm tired", Some("Al")), "Al is tired");
        assert_eq!(third_person("I moved to Paris", Some("Al")), "Al moved to Paris");
        assert_eq!(third_person("I study", Some("Al")), "Al studies");
        assert_eq!(third_person("I watch TV", Some("Al")), "Al watches TV");
    }

    #[test]
    fn predicates() {
        let p = |s: &str| predicate_from(&split_words(s));
        assert_eq!(p("works at").as_deref(), Some("WORKS_FOR"));
        assert_eq!(p("has lived in").as_deref(), Some("LIVES_IN"));
        assert_eq!(p("moved to").as_deref(), Some("LIVES_IN"));
        assert_eq!(p("is married to").as_deref(), Some("IS_MARRIED_TO"));
        assert_eq!(p("adopted a dog named").as_deref(), Some("ADOPTED_DOG_NAMED"));
        assert_eq!(p(", and").as_deref(), None);
    }

    fn temporal(fact: &str, subject: &str) -> (Option<String>, Option<String>) {
        let (v, i) = temporal_for(fact, subject, Timestamp::from_ymd(2024, 3, 15).unwrap());
        (v.map(Timestamp::to_iso), i.map(Timestamp::to_iso))
    }

    #[test]
    fn temporal_rules() {
        let iso = |y, m, d| Some(Timestamp::from_ymd(y, m, d).unwrap().to_iso());
        assert_eq!(temporal("Alice started her new job two weeks ago", "Alice"), (iso(2024, 3, 1), None));
        assert_eq!(temporal("Alice joined Acme in 2020", "Alice"), (iso(2020, 1, 1), None));
        assert_eq!(temporal("Alice works at Acme", "Alice"), (iso(2024, 3, 15), None));
        assert_eq!(temporal("Alice moved to Paris", "Alice"), (None, None));
        assert_eq!(temporal("Alan Turing was born on June 23, 1912", "Alan Turing"), (iso(1912, 6, 23), None));
        assert_eq!(temporal("Bob lived in Rome from 2018 to 2020", "Bob"), (iso(2018, 1, 1), iso(2020, 1, 1)));
        assert_eq!(temporal("Bob works at Acme until March 2025", "Bob"), (iso(2024, 3, 15), iso(2025, 3, 1)));
        assert_eq!(temporal("Bob visited Oslo yesterday", "Bob"), (iso(2024, 3, 14), None));
        assert_eq!(temporal("Bob has 3 cats", "Bob"), (iso(2024, 3, 15), None));
        assert_eq!(temporal("Bob met Carol 3 days ago", "Bob"), (iso(2024, 3, 12), None));
    }

    #[test]
    fn abbreviation_rule() {
        assert!(abbreviates("A. Turing", "Alan Turing"));
        assert!(abbreviates("Turing", "Alan Turing"));
        assert!(!abbreviates("Alan Turing", "Alan Turing"));
        assert!(!abbreviates("B. Turing", "Alan Turing"));
        assert!(!abbreviates("Alan", "Alan Turing"));
    }

    #[test]
    fn contradiction_rule() {
        let m = MockExtractor::new();
        let mk = |id: u128, target: u128, pred: &str| EdgeDescription {
            id: EdgeId::from_u128(id),
            source: crate::ids::NodeId::from_u128(1),
            source_name: "Alice".into(),
            target: crate::ids::NodeId::from_u128(target),
            target_name: String::new(),
            predicate: pred.into(),
            fact: String::new(),
            valid_at: None,
            invalid_at: None,
        };
        let new = mk(10, 3, "LIVES_IN");
        let related = [mk(11, 2, "LIVES_IN"), mk(12, 3, "LIVES_IN"), mk(13, 2, "WORKS_FOR")];
        assert_eq!(m.detect_contradictions(&new, &related).unwrap(), [EdgeId::from_u128(11)]);
    }

    #[test]
    fn summaries_dedupe_and_cap() {
        let s = summarize_texts(&["A b. C d.".into(), "C d. E f.".into()], 320);
        assert_eq!(s, "A b. C d. E f.");
        let capped = summarize_texts(&["One two. Three four.".into()], 10);
        assert_eq!(capped, "One two.");
        assert_eq!(key_terms_of("Alice works at Acme. Alice met Bob at Acme. Carol too."), "Alice, Acme, Bob");
    }

    #[test]
    fn failure_injection() {
        let m = MockExtractor::new();
        m.fail_after(MockStage::Summarize, 1);
        assert!(m.summarize(&["x".into()]).is_ok());
        assert!(m.summarize(&["x".into()]).is_err());
        m.clear_failures();
        assert!(m.summarize(&["x".into()]).is_ok());
        assert_eq!(m.calls(MockStage::Summarize), 3);
    }
}
