//! JSON Lines transcripts: one message per line,
//! `{"actor": "Alice", "content": "...", "timestamp": "2024-03-04T09:00:00Z"}`.
//! `role` is accepted in place of `actor`; blank lines are skipped.

use std::io::BufRead;

use serde::Deserialize;
use tkg_core::{Episode, Timestamp};

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Deserialize)]
struct Line {
    #[serde(alias = "role")]
    actor: String,
    content: String,
    timestamp: Timestamp,
    #[serde(default)]
    session: Option<serde_json::Value>,
}

/// One parsed message with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptMessage {
    pub line: usize,
    pub episode: Episode,
}

/// Parses messages lazily, in file order.
pub fn read(input: impl BufRead) -> impl Iterator<Item = Result<TranscriptMessage, TranscriptError>> {
    input.lines().enumerate().filter_map(|(i, line)| {
        let line_no = i + 1;
        let text = match line {
            Ok(t) => t,
            Err(e) => return Some(Err(e.into())),
        };
        if text.trim().is_empty() {
            return None;
        }
        Some(parse_line(&text, line_no))
    })
}

fn parse_line(text: &str, line: usize) -> Result<TranscriptMessage, TranscriptError> {
    let parsed: Line = serde_json::from_str(text).map_err(|e| TranscriptError::Parse {
        line,
        message: e.to_string(),
    })?;
    if parsed.actor.trim().is_empty() {
        return Err(TranscriptError::Parse {
            line,
            message: "empty actor".into(),
        });
    }
    let mut episode = Episode::message(parsed.actor.trim(), parsed.content, parsed.timestamp);
    if let Some(session) = parsed.session {
        episode.group = match session {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
    }
    Ok(TranscriptMessage { line, episode })
}
