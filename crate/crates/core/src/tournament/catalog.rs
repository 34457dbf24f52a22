//! Segment catalogs: CSV or JSON lists of `{segment_id, video_id, action_label, media_url}`.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratings::PlayerId;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentRef {
    pub segment_id: PlayerId,
    pub video_id: String,
    pub action_label: String,
    #[serde(default)]
    pub media_url: String,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("catalog json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("catalog io: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog row {row}: {reason}")]
    Invalid { row: usize, reason: String },
}

pub fn from_csv<R: Read>(reader: R) -> Result<Vec<SegmentRef>, CatalogError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let segments = rdr.deserialize().collect::<Result<Vec<SegmentRef>, _>>()?;
    check(&segments)?;
    Ok(segments)
}

/// Accepts either a bare array or `{"segments": [...]}`.
pub fn from_json(text: &str) -> Result<Vec<SegmentRef>, CatalogError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        Bare(Vec<SegmentRef>),
        Wrapped { segments: Vec<SegmentRef> },
    }
    let segments = match serde_json::from_str(text)? {
        Doc::Bare(s) | Doc::Wrapped { segments: s } => s,
    };
    check(&segments)?;
    Ok(segments)
}

/// Parses by sniffing the first non-blank character: `[` or `{` means JSON.
pub fn parse(text: &str) -> Result<Vec<SegmentRef>, CatalogError> {
    match text.trim_start().chars().next() {
        Some('[') | Some('{') => from_json(text),
        _ => from_csv(text.as_bytes()),
    }
}

fn check(segments: &[SegmentRef]) -> Result<(), CatalogError> {
    for (i, s) in segments.iter().enumerate() {
        let reason = if s.video_id.is_empty() {
            "empty video_id"
        } else if s.action_label.is_empty() {
            "empty action_label"
        } else {
            continue;
        };
        return Err(CatalogError::Invalid { row: i + 1, reason: reason.into() });
    }
    Ok(())
}

/// One arena per action label.
pub fn group_by_action(segments: &[SegmentRef]) -> BTreeMap<String, Vec<SegmentRef>> {
    let mut out: BTreeMap<String, Vec<SegmentRef>> = BTreeMap::new();
    for s in segments {
        out.entry(s.action_label.clone()).or_default().push(s.clone());
    }
    out
}

pub fn to_csv(segments: &[SegmentRef]) -> Result<String, CatalogError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in segments {
        w.serialize(s)?;
    }
    let bytes = w.into_inner().map_err(|e| CatalogError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "segment_id,video_id,action_label,media_url\n\
                       s1,v1,attach_leg,http://x/s1.mp4\n\
                       s2,v2,attach_leg,http://x/s2.mp4\n\
                       s3,v1,tighten,http://x/s3.mp4\n";

    #[test]
    fn csv_and_json_agree() {
        let a = parse(CSV).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(parse(&json).unwrap(), a);
        let wrapped = format!("{{\"segments\": {json}}}");
        assert_eq!(parse(&wrapped).unwrap(), a);
        assert_eq!(parse(&to_csv(&a).unwrap()).unwrap(), a);
        let groups = group_by_action(&a);
        assert_eq!(groups["attach_leg"].len(), 2);
        assert_eq!(groups["tighten"].len(), 1);
    }

    #[test]
    fn rejects_missing_video() {
        let bad = "segment_id,video_id,action_label,media_url\ns1,,a,u\n";
        assert!(matches!(parse(bad), Err(CatalogError::Invalid { row: 1, .. })));
        assert!(parse("segment_id,video_id\ns1,v1\n").is_err());
    }
}
