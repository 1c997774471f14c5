//! Renders reranked facts, entities and communities into the context block
//! handed to the agent.

use crate::graph::{CommunityNode, EntityNode, SemanticEdge};
use crate::time::Timestamp;

const HEADER: &str = "FACTS and ENTITIES represent relevant context to the current conversation.\n\n\
These are the most relevant facts and their valid date ranges. If the fact is about an event, the event takes place during this time.\n\n\
format: FACT (Date range: from - to)\n\n\
<FACTS>\n\n";

const ENTITIES_HEADER: &str = "\n\n</FACTS>\n\n\
These are the most relevant entities\n\n\
ENTITY_NAME: entity summary\n\n\
<ENTITIES>\n\n";

const ENTITIES_FOOTER: &str = "\n\n</ENTITIES>";

const COMMUNITIES_HEADER: &str = "\n\nThese are the most relevant communities\n\n<COMMUNITIES>\n\n";

const COMMUNITIES_FOOTER: &str = "\n\n</COMMUNITIES>";

/// A fact line's inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FactLine<'a> {
    pub fact: &'a str,
    pub t_valid: Option<Timestamp>,
    pub t_invalid: Option<Timestamp>,
}

impl<'a> From<&'a SemanticEdge> for FactLine<'a> {
    fn from(e: &'a SemanticEdge) -> Self {
        FactLine {
            fact: &e.fact,
            t_valid: e.t_valid,
            t_invalid: e.t_invalid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextOptions {
    /// Append a communities block when any communities are given.
    pub include_communities: bool,
}

impl Default for ContextOptions {
    fn default() -> Self {
        ContextOptions {
            include_communities: true,
        }
    }
}

fn one_line(s: &str) -> String {
    s.split(['\n', '\r']).map(str::trim).filter(|p| !p.is_empty()).collect::<Vec<_>>().join(" ")
}

/// `FACT (Date range: FROM - TO)`; an unset start renders `unknown`, an
/// unset end `present`.
pub fn fact_line(f: &FactLine<'_>) -> String {
    let from = f.t_valid.map_or_else(|| "unknown".to_string(), Timestamp::to_display_date);
    let to = f.t_invalid.map_or_else(|| "present".to_string(), Timestamp::to_display_date);
    format!("{} (Date range: {from} - {to})", one_line(f.fact))
}

pub fn entity_line(e: &EntityNode) -> String {
    format!("{}: {}", one_line(&e.name), one_line(&e.summary))
}

fn community_line(c: &CommunityNode) -> String {
    let text = if c.summary.trim().is_empty() { &c.name } else { &c.summary };
    one_line(text)
}

/// Builds the context string. Items keep their input order; nothing is
/// dropped or truncated here.
pub fn build_context<'a>(
    facts: impl IntoIterator<Item = FactLine<'a>>,
    entities: &[&EntityNode],
    communities: &[&CommunityNode],
    opts: ContextOptions,
) -> String {
    let mut out = String::from(HEADER);
    let facts: Vec<String> = facts.into_iter().map(|f| fact_line(&f)).collect();
    out.push_str(&facts.join("\n"));
    out.push_str(ENTITIES_HEADER);
    let entities: Vec<String> = entities.iter().map(|e| entity_line(e)).collect();
    out.push_str(&entities.join("\n"));
    out.push_str(ENTITIES_FOOTER);
    if opts.include_communities && !communities.is_empty() {
        out.push_str(COMMUNITIES_HEADER);
        let lines: Vec<String> = communities.iter().map(|c| community_line(c)).collect();
        out.push_str(&lines.join("\n"));
        out.push_str(COMMUNITIES_FOOTER);
    }
    out
}

/// Whitespace-separated token count.
pub fn token_estimate(context: &str) -> usize {
    crate::text::whitespace_tokens(context)
}
