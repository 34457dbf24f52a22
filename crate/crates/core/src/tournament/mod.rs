//! Per-action tournaments driven by an append-only event log.

mod arena;
pub mod catalog;
pub mod events;
pub mod splits;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arena::{Arena, CompletedRound, PairState, PendingPair, SubmitStatus};
pub use catalog::SegmentRef;
pub use events::{Event, EventLogError, EventRecord, OpenedPair};
pub use splits::{export_splits, Split, SplitAssignment, SplitCounts, SplitError, SplitSpec};

use crate::aggregation::{AggregationError, AggregationPolicy, WorkerId};
use crate::analysis::AnalysisError;
use crate::pairing::{min_recommended_rounds, PairingError};
use crate::ratings::{RatingError, DEFAULT_K_FACTOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Swiss,
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TournamentConfig {
    pub rounds: usize,
    pub k_factor: f64,
    pub votes_initial: usize,
    pub votes_escalation: usize,
    pub escalation_threshold: f64,
    pub presentation_seed: u64,
    pub gold_rate: f64,
    pub allow_no_difference: bool,
    pub schedule: Schedule,
    /// Shuffle the tie order of the first round under this seed instead of using player ids.
    pub first_round_shuffle_seed: Option<u64>,
    pub pairing_lookahead: bool,
}

impl Default for TournamentConfig {
    fn default() -> Self {
        Self {
            rounds: 6,
            k_factor: DEFAULT_K_FACTOR,
            votes_initial: 5,
            votes_escalation: 3,
            escalation_threshold: 0.8,
            presentation_seed: 0,
            gold_rate: 0.0,
            allow_no_difference: false,
            schedule: Schedule::Swiss,
            first_round_shuffle_seed: None,
            pairing_lookahead: true,
        }
    }
}

impl TournamentConfig {
    pub fn aggregation_policy(&self) -> AggregationPolicy {
        AggregationPolicy {
            initial_votes: self.votes_initial,
            escalation_votes: self.votes_escalation,
            escalation_threshold: self.escalation_threshold,
            allow_no_difference: self.allow_no_difference,
        }
    }

    pub fn validate(&self) -> Result<(), TournamentError> {
        self.aggregation_policy().validate()?;
        if !(self.k_factor.is_finite() && self.k_factor > 0.0) {
            return Err(RatingError::InvalidKFactor(self.k_factor).into());
        }
        if !(0.0..=1.0).contains(&self.gold_rate) {
            return Err(AggregationError::InvalidRate(self.gold_rate).into());
        }
        Ok(())
    }

    /// Non-fatal problems for an arena of `n` players.
    pub fn warnings(&self, n: usize) -> Vec<String> {
        let mut out = Vec::new();
        if let Ok(min) = min_recommended_rounds(n) {
            if self.schedule == Schedule::Swiss && self.rounds < min as usize {
                out.push(format!(
                    "{} rounds is below the recommended minimum of {min} for {n} players",
                    self.rounds
                ));
            }
        }
        if n >= 2 && self.schedule == Schedule::Swiss && self.rounds > n - 1 + n % 2 {
            out.push(format!("{} rounds exceeds a full round robin for {n} players; rematches are unavoidable", self.rounds));
        }
        out
    }
}

/// Anything that decides whether a worker may vote.
pub trait WorkerGate {
    fn is_qualified(&self, worker: &WorkerId) -> bool;
}

/// Gate that admits every worker (used by simulations and replay).
#[derive(Debug, Clone, Copy, Default)]
pub struct AdmitAll;

impl WorkerGate for AdmitAll {
    fn is_qualified(&self, _: &WorkerId) -> bool {
        true
    }
}

impl<F: Fn(&WorkerId) -> bool> WorkerGate for F {
    fn is_qualified(&self, worker: &WorkerId) -> bool {
        self(worker)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TournamentError {
    #[error("an arena needs at least 2 segments, got {0}")]
    ArenaTooSmall(usize),
    #[error("segments mix actions `{0}` and `{1}`")]
    MixedActions(String, String),
    #[error("segment `{0}` listed twice")]
    DuplicateSegment(String),
    #[error("segment `{0}` has an empty video id")]
    MissingVideo(String),
    #[error("{count} pairs are still unresolved")]
    UnresolvedPairs { count: usize },
    #[error("round {0} is already open")]
    RoundAlreadyOpen(usize),
    #[error("no round is open")]
    NoOpenRound,
    #[error("all {0} rounds have been played")]
    MaxRoundsReached(usize),
    #[error("unknown pair `{0}`")]
    UnknownPair(String),
    #[error("pair `{0}` is already resolved")]
    PairClosed(String),
    #[error("worker `{0}` is not qualified")]
    UnqualifiedWorker(WorkerId),
    #[error("worker `{worker}` already voted on pair `{pair_id}`")]
    DuplicateVote { worker: WorkerId, pair_id: String },
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("replay failed at event {seq}: {reason}")]
    Replay { seq: u64, reason: String },
}

impl TournamentError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            TournamentError::ArenaTooSmall(_) => "arena_too_small",
            TournamentError::MixedActions(..) => "mixed_actions",
            TournamentError::DuplicateSegment(_) => "duplicate_segment",
            TournamentError::MissingVideo(_) => "missing_video",
            TournamentError::UnresolvedPairs { .. } => "unresolved_pairs",
            TournamentError::RoundAlreadyOpen(_) => "round_already_open",
            TournamentError::NoOpenRound => "no_open_round",
            TournamentError::MaxRoundsReached(_) => "max_rounds_reached",
            TournamentError::UnknownPair(_) => "unknown_pair",
            TournamentError::PairClosed(_) => "pair_closed",
            TournamentError::UnqualifiedWorker(_) => "worker_unqualified",
            TournamentError::DuplicateVote { .. } => "duplicate_vote",
            TournamentError::Rating(_) => "rating_error",
            TournamentError::Pairing(_) => "pairing_error",
            TournamentError::Aggregation(AggregationError::NoDifferenceDisabled) => "no_difference_disabled",
            TournamentError::Aggregation(_) => "aggregation_error",
            TournamentError::Analysis(_) => "analysis_error",
            TournamentError::Replay { .. } => "replay_mismatch",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rounds_exceed_minimum_for_sixteen() {
        let c = TournamentConfig::default();
        assert_eq!(c.rounds, 6);
        assert!(c.warnings(16).is_empty());
        let short = TournamentConfig { rounds: 3, ..c.clone() };
        assert_eq!(short.warnings(16).len(), 1);
        let long = TournamentConfig { rounds: 20, ..c };
        assert_eq!(long.warnings(16).len(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(TournamentConfig::default().validate().is_ok());
        assert!(TournamentConfig { k_factor: 0.0, ..Default::default() }.validate().is_err());
        assert!(TournamentConfig { gold_rate: 2.0, ..Default::default() }.validate().is_err());
        assert!(TournamentConfig { votes_initial: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn config_fills_missing_fields_from_defaults() {
        let c: TournamentConfig = serde_json::from_str(r#"{"rounds": 4}"#).unwrap();
        assert_eq!(c.rounds, 4);
        assert_eq!(c.votes_initial, 5);
    }
}
