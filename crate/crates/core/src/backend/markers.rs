//! Inline uncertainty markers: `⟦unc:LEVEL⟧span text⟧`.
//!
//! Markers are stripped from the text; each marked run becomes an
//! [`UncertaintySpan`] over character offsets of the stripped text.

use crate::protocol::{UncertaintyLevel, UncertaintySpan};

const OPEN: &str = "⟦unc:";
const CLOSE: char = '⟧';

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MarkerError {
    #[error("unterminated uncertainty marker opened at char {0}")]
    Unterminated(u64),
    #[error("unknown uncertainty level `{0}`")]
    UnknownLevel(String),
    #[error("closing bracket at char {0} has no open marker")]
    StrayClose(u64),
    #[error("uncertainty markers cannot nest (char {0})")]
    Nested(u64),
    #[error("empty uncertainty span at char {0}")]
    EmptySpan(u64),
}

/// Strip markers from `raw`, returning the plain text and its spans.
pub fn parse_markers(raw: &str) -> Result<(String, Vec<UncertaintySpan>), MarkerError> {
    let mut text = String::with_capacity(raw.len());
    let mut spans = Vec::new();
    let mut open: Option<(u64, UncertaintyLevel)> = None;
    let mut len = 0u64;
    let mut rest = raw;
    while let Some(c) = rest.chars().next() {
        if let Some(after) = rest.strip_prefix(OPEN) {
            if open.is_some() {
                return Err(MarkerError::Nested(len));
            }
            let end = after.find(CLOSE).ok_or(MarkerError::Unterminated(len))?;
            let level = after[..end]
                .parse()
                .map_err(|_| MarkerError::UnknownLevel(after[..end].to_string()))?;
            open = Some((len, level));
            rest = &after[end + CLOSE.len_utf8()..];
            continue;
        }
        if c == CLOSE {
            let (start, level) = open.take().ok_or(MarkerError::StrayClose(len))?;
            if start == len {
                return Err(MarkerError::EmptySpan(len));
            }
            spans.push(UncertaintySpan::new(start, len, level));
        } else {
            text.push(c);
            len += 1;
        }
        rest = &rest[c.len_utf8()..];
    }
    match open {
        Some((start, _)) => Err(MarkerError::Unterminated(start)),
        None => Ok((text, spans)),
    }
}

/// Inverse of [`parse_markers`] for well-formed, non-overlapping spans.
pub fn render_markers(text: &str, spans: &[UncertaintySpan]) -> String {
    let mut sorted: Vec<_> = spans.to_vec();
    sorted.sort_by_key(|s| s.start);
    let mut out = String::with_capacity(text.len());
    let mut next = sorted.iter().peekable();
    let mut closing: Option<u64> = None;
    for (i, c) in text.chars().enumerate() {
        let i = i as u64;
        if closing == Some(i) {
            out.push(CLOSE);
            closing = None;
        }
        if let Some(span) = next.next_if(|s| s.start == i) {
            out.push_str(OPEN);
            out.push_str(&span.level.to_string());
            out.push(CLOSE);
            closing = Some(span.end);
        }
        out.push(c);
    }
    if closing.is_some() {
        out.push(CLOSE);
    }
    out
}
