//! On-disk layout under the data directory:
//!
//! ```text
//! arenas/<arena_id>.jsonl   event log (header line, then one record per line)
//! gold/<arena_id>.json      gold-standard pairs for the arena
//! workers.json              worker records and gold votes
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use skillarena_core::tournament::events::{read_log, write_log, write_records, EventLogError};
use skillarena_core::tournament::EventRecord;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Log { path: PathBuf, source: EventLogError },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// File-name-safe form of an arena id; ids are recovered from the log itself.
pub fn file_stem(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for dir in [root.join("arenas"), root.join("gold")] {
            fs::create_dir_all(&dir).map_err(|source| StoreError::Io { path: dir.clone(), source })?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn arena_log_path(&self, arena_id: &str) -> PathBuf {
        self.root.join("arenas").join(format!("{}.jsonl", file_stem(arena_id)))
    }

    fn gold_path(&self, arena_id: &str) -> PathBuf {
        self.root.join("gold").join(format!("{}.json", file_stem(arena_id)))
    }

    fn workers_path(&self) -> PathBuf {
        self.root.join("workers.json")
    }

    /// Writes a fresh log; fails if one already exists.
    pub fn create_log(&self, arena_id: &str, records: &[EventRecord]) -> Result<(), StoreError> {
        let path = self.arena_log_path(arena_id);
        let io = |source| StoreError::Io { path: path.clone(), source };
        let file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(io)?;
        let mut w = BufWriter::new(file);
        write_log(&mut w, records).map_err(|source| StoreError::Log { path: path.clone(), source })?;
        w.flush().map_err(io)?;
        w.get_ref().sync_data().map_err(io)
    }

    pub fn append_log(&self, arena_id: &str, records: &[EventRecord]) -> Result<(), StoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let path = self.arena_log_path(arena_id);
        let io = |source| StoreError::Io { path: path.clone(), source };
        let file = OpenOptions::new().append(true).open(&path).map_err(io)?;
        let mut w = BufWriter::new(file);
        write_records(&mut w, records).map_err(|source| StoreError::Log { path: path.clone(), source })?;
        w.flush().map_err(io)?;
        w.get_ref().sync_data().map_err(io)
    }

    pub fn read_log_file(path: &Path) -> Result<Vec<EventRecord>, StoreError> {
        let file = File::open(path).map_err(|source| StoreError::Io { path: path.into(), source })?;
        read_log(BufReader::new(file)).map_err(|source| StoreError::Log { path: path.into(), source })
    }

    /// Every arena log, in file-name order.
    pub fn load_logs(&self) -> Result<Vec<(PathBuf, Vec<EventRecord>)>, StoreError> {
        let dir = self.root.join("arenas");
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|source| StoreError::Io { path: dir.clone(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        paths.into_iter().map(|p| Self::read_log_file(&p).map(|r| (p, r))).collect()
    }

    pub fn save_gold<T: Serialize>(&self, arena_id: &str, gold: &T) -> Result<(), StoreError> {
        self.write_json(&self.gold_path(arena_id), gold)
    }

    pub fn load_gold<T: DeserializeOwned + Default>(&self, arena_id: &str) -> Result<T, StoreError> {
        self.read_json(&self.gold_path(arena_id))
    }

    pub fn save_workers<T: Serialize>(&self, workers: &T) -> Result<(), StoreError> {
        self.write_json(&self.workers_path(), workers)
    }

    pub fn load_workers<T: DeserializeOwned + Default>(&self) -> Result<T, StoreError> {
        self.read_json(&self.workers_path())
    }

    /// Writes through a temporary file and a rename so readers never see half a document.
    fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), StoreError> {
        let tmp = path.with_extension("json.tmp");
        let io = |source| StoreError::Io { path: path.into(), source };
        let bytes = serde_json::to_vec_pretty(value).map_err(|source| StoreError::Json { path: path.into(), source })?;
        fs::write(&tmp, bytes).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    fn read_json<T: DeserializeOwned + Default>(&self, path: &Path) -> Result<T, StoreError> {
        match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|source| StoreError::Json { path: path.into(), source }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(T::default()),
            Err(source) => Err(StoreError::Io { path: path.into(), source }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_stems_escape_unsafe_bytes() {
        assert_eq!(file_stem("attach_leg-1"), "attach_leg-1");
        assert_eq!(file_stem("a/b c"), "a%2Fb%20c");
    }
}
