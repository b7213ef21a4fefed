use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::chain::EventSink;
use super::event::TraceEvent;
use super::verify::import_jsonl;
use super::LedgerError;
use crate::canonical;

pub const TRACE_EXTENSION: &str = "trace.jsonl";
const INDEX_FILE: &str = "index.jsonl";

/// Appends each event line to a file and syncs it before returning.
#[derive(Debug)]
pub struct FileSink {
    file: File,
}

impl FileSink {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FileSink { file })
    }
}

impl EventSink for FileSink {
    fn persist(&mut self, _event: &TraceEvent, line: &str) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(line.len() + 1);
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
        self.file.write_all(&buf)?;
        self.file.sync_data()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexEntry {
    session_id: String,
    file: String,
}

/// A directory holding one append-only trace file per session plus an index
/// of sessions in creation order.
#[derive(Debug, Clone)]
pub struct FileStore {
    dir: PathBuf,
}

fn storage(e: impl std::fmt::Display) -> LedgerError {
    LedgerError::StorageFailure(e.to_string())
}

impl FileStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LedgerError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(storage)?;
        Ok(FileStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn trace_path(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.{TRACE_EXTENSION}"))
    }

    /// Register a new session and return a sink for its trace.
    pub fn create_session(&self, session_id: &str) -> Result<FileSink, LedgerError> {
        if session_id.is_empty()
            || !session_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(storage(format!("session id `{session_id}` is not file-safe")));
        }
        let path = self.trace_path(session_id);
        if path.exists() {
            return Err(storage(format!("trace for {session_id} already exists")));
        }
        let sink = FileSink::create(&path).map_err(storage)?;
        let entry = IndexEntry {
            session_id: session_id.to_string(),
            file: format!("{session_id}.{TRACE_EXTENSION}"),
        };
        let mut line = canonical::to_vec(&entry).map_err(storage)?;
        line.push(b'\n');
        let mut index = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(INDEX_FILE))
            .map_err(storage)?;
        index.write_all(&line).map_err(storage)?;
        index.sync_data().map_err(storage)?;
        Ok(sink)
    }

    pub fn reopen_sink(&self, session_id: &str) -> Result<FileSink, LedgerError> {
        FileSink::create(&self.trace_path(session_id)).map_err(storage)
    }

    /// Session ids in creation order.
    pub fn session_ids(&self) -> Result<Vec<String>, LedgerError> {
        let index = self.dir.join(INDEX_FILE);
        if !index.exists() {
            return Ok(Vec::new());
        }
        let text = fs::read_to_string(&index).map_err(storage)?;
        let mut seen = BTreeSet::new();
        let mut ids = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let entry: IndexEntry = serde_json::from_str(line).map_err(|e| LedgerError::Malformed {
                line: i as u64 + 1,
                reason: format!("index: {e}"),
            })?;
            if seen.insert(entry.session_id.clone()) {
                ids.push(entry.session_id);
            }
        }
        Ok(ids)
    }

    pub fn load(&self, session_id: &str) -> Result<Vec<TraceEvent>, LedgerError> {
        let path = self.trace_path(session_id);
        if !path.exists() {
            return Err(LedgerError::UnknownSession(session_id.to_string()));
        }
        let bytes = fs::read(&path).map_err(storage)?;
        import_jsonl(&bytes)
    }
}
