use serde::Serialize;

use super::event::{TraceEvent, GENESIS_HASH};
use super::LedgerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ChainStatus {
    Intact,
    Broken { first_break: u64 },
}

impl ChainStatus {
    pub fn is_intact(self) -> bool {
        matches!(self, ChainStatus::Intact)
    }

    pub fn first_break(self) -> Option<u64> {
        match self {
            ChainStatus::Intact => None,
            ChainStatus::Broken { first_break } => Some(first_break),
        }
    }
}

/// Check that every event's hash recomputes and links to its predecessor.
///
/// Breaks are reported by position (`index + 1`), which is the event's seq
/// unless the seq itself was tampered with. An event that recomputes cleanly
/// but sits at the wrong position is a structural gap, not a tamper, and is
/// reported as [`LedgerError::NonContiguousSeq`].
pub fn verify_chain(events: &[TraceEvent]) -> Result<ChainStatus, LedgerError> {
    if events.is_empty() {
        return Err(LedgerError::EmptyTrace);
    }
    let mut prev_hash = GENESIS_HASH;
    for (index, event) in events.iter().enumerate() {
        let position = index as u64 + 1;
        if let Some(status) = check_event(event, position, prev_hash)? {
            return Ok(status);
        }
        prev_hash = &event.hash;
    }
    Ok(ChainStatus::Intact)
}

fn check_event(
    event: &TraceEvent,
    position: u64,
    prev_hash: &str,
) -> Result<Option<ChainStatus>, LedgerError> {
    let broken = Some(ChainStatus::Broken { first_break: position });
    if event.compute_hash() != event.hash {
        return Ok(broken);
    }
    if event.seq != position {
        return Err(LedgerError::NonContiguousSeq {
            expected: position,
            found: event.seq,
        });
    }
    if event.prev_hash != prev_hash {
        return Ok(broken);
    }
    Ok(None)
}

pub fn export_jsonl(events: &[TraceEvent]) -> Vec<u8> {
    let mut out = Vec::new();
    for event in events {
        out.extend_from_slice(event.to_line().as_bytes());
        out.push(b'\n');
    }
    out
}

enum LineIssue {
    /// Not JSON at all, or cut short.
    Malformed(String),
    /// Valid JSON that is not a canonical trace event.
    Tampered,
}

fn parse_line(raw: &[u8], terminated: bool) -> Result<TraceEvent, LineIssue> {
    if !terminated {
        return Err(LineIssue::Malformed("missing trailing newline (truncated?)".into()));
    }
    let text = std::str::from_utf8(raw).map_err(|e| LineIssue::Malformed(e.to_string()))?;
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| LineIssue::Malformed(e.to_string()))?;
    let event: TraceEvent = serde_json::from_value(value).map_err(|_| LineIssue::Tampered)?;
    if event.to_line().as_bytes() != raw {
        return Err(LineIssue::Tampered);
    }
    Ok(event)
}

fn lines(bytes: &[u8]) -> impl Iterator<Item = (u64, &[u8], bool)> {
    let ends_with_newline = bytes.last() == Some(&b'\n');
    let body = if ends_with_newline { &bytes[..bytes.len() - 1] } else { bytes };
    let count = body.split(|b| *b == b'\n').count();
    body.split(|b| *b == b'\n')
        .enumerate()
        .map(move |(i, line)| (i as u64 + 1, line, ends_with_newline || i + 1 < count))
}

/// Strictly parse an exported trace. Any non-canonical line is an error.
pub fn import_jsonl(bytes: &[u8]) -> Result<Vec<TraceEvent>, LedgerError> {
    if bytes.is_empty() {
        return Err(LedgerError::EmptyTrace);
    }
    lines(bytes)
        .map(|(line, raw, terminated)| {
            parse_line(raw, terminated).map_err(|issue| LedgerError::Malformed {
                line,
                reason: match issue {
                    LineIssue::Malformed(reason) => reason,
                    LineIssue::Tampered => "not a canonical trace event".into(),
                },
            })
        })
        .collect()
}

/// Verify an exported trace byte stream.
///
/// Lines are checked in order and the first problem wins: a line that is
/// valid JSON but not a canonical trace event counts as a break at that line,
/// while a line that is not JSON at all (or is truncated) is reported as
/// [`LedgerError::Malformed`].
pub fn verify_jsonl(bytes: &[u8]) -> Result<ChainStatus, LedgerError> {
    if bytes.is_empty() {
        return Err(LedgerError::EmptyTrace);
    }
    let mut prev_hash = GENESIS_HASH.to_string();
    for (line, raw, terminated) in lines(bytes) {
        let event = match parse_line(raw, terminated) {
            Ok(event) => event,
            Err(LineIssue::Tampered) => return Ok(ChainStatus::Broken { first_break: line }),
            Err(LineIssue::Malformed(reason)) => return Err(LedgerError::Malformed { line, reason }),
        };
        if let Some(status) = check_event(&event, line, &prev_hash)? {
            return Ok(status);
        }
        prev_hash = event.hash;
    }
    Ok(ChainStatus::Intact)
}
