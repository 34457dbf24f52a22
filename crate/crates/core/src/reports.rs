//! Tabular exports with fixed column names.
//!
//! | writer | columns |
//! |---|---|
//! | [`write_leaderboard`] | `arena_id,rank,segment_id,rating` |
//! | [`write_percentiles`] | `arena_id,rank,segment_id,rating,percentile` |
//! | [`write_tau_series`] | `arena_id,round,tau` |
//! | [`write_agreement_summary`] | `arena_id,total_comparisons,escalated,mean_agreement,winner_balance` |
//! | [`write_agreement_distribution`] | `arena_id,metric,value,count` |
//! | [`write_splits`] | `segment_id,video_id,action_label,split` |
//!
//! The vote log is line-delimited JSON, one [`VoteLogRecord`] per line:
//! `{"worker_id":..,"arena_id":..,"pair":[left,right],"choice":..,"is_gold":..,"sequence":..}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aggregation::{Choice, WorkerId};
use crate::analysis::{AgreementStats, PercentileTable, Ranking, TauSeries};
use crate::ratings::PlayerId;
use crate::tournament::{Event, EventRecord, SegmentRef, SplitAssignment};

pub fn write_leaderboard<W: Write>(w: W, arena_id: &str, ranking: &Ranking) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["arena_id", "rank", "segment_id", "rating"])?;
    for (i, (p, r)) in ranking.entries().iter().enumerate() {
        out.write_record([arena_id, &(i + 1).to_string(), p.as_str(), &r.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_percentiles<W: Write>(w: W, arena_id: &str, table: &PercentileTable) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["arena_id", "rank", "segment_id", "rating", "percentile"])?;
    for row in &table.rows {
        out.write_record([
            arena_id,
            &row.rank.to_string(),
            row.player.as_str(),
            &row.score.to_string(),
            &row.percentile.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_tau_series<W: Write>(w: W, arena_id: &str, series: &TauSeries) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["arena_id", "round", "tau"])?;
    for (round, tau) in &series.points {
        out.write_record([arena_id, &round.to_string(), &tau.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_agreement_summary<W: Write>(w: W, rows: &[(&str, &AgreementStats)]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["arena_id", "total_comparisons", "escalated", "mean_agreement", "winner_balance"])?;
    for (arena_id, s) in rows {
        out.write_record([
            arena_id.to_string(),
            s.total_comparisons.to_string(),
            s.escalated.to_string(),
            s.mean_agreement.to_string(),
            s.winner_balance.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `metric` is `agreement_rate` or `vote_difference`.
pub fn write_agreement_distribution<W: Write>(w: W, rows: &[(&str, &AgreementStats)]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["arena_id", "metric", "value", "count"])?;
    for (arena_id, s) in rows {
        for (metric, hist) in
            [("agreement_rate", &s.agreement_distribution), ("vote_difference", &s.vote_difference_distribution)]
        {
            for (value, count) in hist {
                out.write_record([arena_id, metric, value.to_string().as_str(), count.to_string().as_str()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_splits<W: Write>(w: W, segments: &[SegmentRef], assignment: &SplitAssignment) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["segment_id", "video_id", "action_label", "split"])?;
    let mut sorted: Vec<&SegmentRef> = segments.iter().collect();
    sorted.sort_by(|a, b| (&a.action_label, &a.segment_id).cmp(&(&b.action_label, &b.segment_id)));
    for s in sorted {
        if let Some(split) = assignment.get(&s.segment_id) {
            out.write_record([s.segment_id.as_str(), &s.video_id, &s.action_label, &split.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteLogRecord {
    pub worker_id: WorkerId,
    pub arena_id: String,
    /// Segment ids in presented order.
    pub pair: (PlayerId, PlayerId),
    pub choice: Choice,
    pub is_gold: bool,
    pub sequence: u64,
}

/// Vote records extracted from an arena's event log.
pub fn vote_log(events: &[EventRecord]) -> Vec<VoteLogRecord> {
    events
        .iter()
        .filter_map(|r| match &r.event {
            Event::Vote { worker_id, pair, choice, is_gold, .. } => Some(VoteLogRecord {
                worker_id: worker_id.clone(),
                arena_id: r.arena_id.clone(),
                pair: pair.clone(),
                choice: *choice,
                is_gold: *is_gold,
                sequence: r.seq,
            }),
            _ => None,
        })
        .collect()
}

pub fn write_vote_log<'a, W: Write>(mut w: W, records: impl IntoIterator<Item = &'a VoteLogRecord>) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
