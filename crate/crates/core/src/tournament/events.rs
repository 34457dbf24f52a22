//! Event log records and their line-delimited JSON encoding.
//!
//! The first line of a log file is a header
//! `{"schema":"skillarena.event-log","version":1}`. Every following line is
//! one record:
//!
//! ```text
//! {"seq":3,"arena_id":"attach_leg","event_type":"vote","payload":{...}}
//! ```
//!
//! `event_type` is one of `init`, `open_round`, `vote`, `close_round`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::SegmentRef;
use super::TournamentConfig;
use crate::aggregation::{Choice, WorkerId};
use crate::ratings::PlayerId;

pub const SCHEMA: &str = "skillarena.event-log";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub version: u32,
}

impl Default for LogHeader {
    fn default() -> Self {
        Self { schema: SCHEMA.into(), version: SCHEMA_VERSION }
    }
}

/// A pair as scheduled, in the order it is shown to workers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenedPair {
    pub pair_id: String,
    pub left: PlayerId,
    pub right: PlayerId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event_type", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Init {
        segments: Vec<SegmentRef>,
        config: TournamentConfig,
    },
    OpenRound {
        round: usize,
        pairs: Vec<OpenedPair>,
        bye: Option<PlayerId>,
        rematch_count: usize,
    },
    Vote {
        pair_id: String,
        worker_id: WorkerId,
        /// Segment ids in presented order.
        pair: (PlayerId, PlayerId),
        choice: Choice,
        is_gold: bool,
    },
    CloseRound {
        round: usize,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Init { .. } => "init",
            Event::OpenRound { .. } => "open_round",
            Event::Vote { .. } => "vote",
            Event::CloseRound { .. } => "close_round",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub arena_id: String,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("event log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("event log header missing or unsupported (expected {SCHEMA} v{SCHEMA_VERSION})")]
    Header,
}

pub fn write_header<W: Write>(mut w: W) -> Result<(), EventLogError> {
    serde_json::to_writer(&mut w, &LogHeader::default()).map_err(|e| EventLogError::Parse { line: 0, source: e })?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_records<'a, W: Write>(
    mut w: W,
    records: impl IntoIterator<Item = &'a EventRecord>,
) -> Result<(), EventLogError> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| EventLogError::Parse { line: 0, source: e })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Header followed by every record.
pub fn write_log<'a, W: Write>(
    mut w: W,
    records: impl IntoIterator<Item = &'a EventRecord>,
) -> Result<(), EventLogError> {
    write_header(&mut w)?;
    write_records(&mut w, records)
}

pub fn read_log<R: BufRead>(r: R) -> Result<Vec<EventRecord>, EventLogError> {
    let mut lines = r.lines().enumerate();
    let header: LogHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?).map_err(|_| EventLogError::Header)?,
        None => return Err(EventLogError::Header),
    };
    if header != LogHeader::default() {
        return Err(EventLogError::Header);
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EventLogError::Parse { line: i + 1, source: e })?);
    }
    Ok(out)
}
