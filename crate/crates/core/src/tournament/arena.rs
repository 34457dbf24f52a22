use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::catalog::SegmentRef;
use super::events::{Event, EventRecord, OpenedPair};
use super::{Schedule, TournamentConfig, TournamentError, WorkerGate};
use crate::aggregation::{aggregate_votes, needs_escalation, AggregatedOutcome, AggregationPolicy, Choice, Vote, WorkerId};
use crate::analysis::{self, AgreementStats, PercentileTable, Ranking, TauSeries};
use crate::pairing::{
    generate_round_with, round_robin_schedule, MatchHistory, PairingPolicy, RoundPairing, Standings, UnorderedPair,
};
use crate::ratings::{MatchResult, PlayerId, RatingBook};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairState {
    Open,
    AwaitingEscalation,
    Resolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingPair {
    pub pair_id: String,
    pub pair: UnorderedPair,
    pub left: PlayerId,
    pub right: PlayerId,
    pub votes: Vec<Vote>,
    pub state: PairState,
    pub outcome: Option<AggregatedOutcome>,
}

impl PendingPair {
    /// Votes this pair needs before it can resolve in its current state.
    pub fn required_votes(&self, policy: &AggregationPolicy) -> usize {
        match self.state {
            PairState::Open => policy.initial_votes,
            PairState::AwaitingEscalation | PairState::Resolved => policy.escalated_votes(),
        }
    }

    pub fn remaining_votes(&self, policy: &AggregationPolicy) -> usize {
        match self.state {
            PairState::Resolved => 0,
            _ => self.required_votes(policy).saturating_sub(self.votes.len()),
        }
    }

    pub fn has_voted(&self, worker: &WorkerId) -> bool {
        self.votes.iter().any(|v| &v.worker == worker)
    }
}

/// What `submit_vote` did to the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitStatus {
    pub state: PairState,
    pub votes: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedRound {
    pub round: usize,
    pub pairing: RoundPairing,
    pub outcomes: Vec<AggregatedOutcome>,
    /// Leaderboard after this round's updates.
    pub ranking: Ranking,
}

/// Tournament state for one action. All mutation goes through events, so the
/// state is always the fold of [`Arena::events`].
#[derive(Debug, Clone, PartialEq)]
pub struct Arena {
    arena_id: String,
    segments: Vec<SegmentRef>,
    config: TournamentConfig,
    book: RatingBook,
    history: MatchHistory,
    round: usize,
    open: bool,
    pending: Vec<PendingPair>,
    bye: Option<PlayerId>,
    completed: Vec<CompletedRound>,
    events: Vec<EventRecord>,
}

impl Arena {
    pub fn init(
        arena_id: impl Into<String>,
        segments: Vec<SegmentRef>,
        config: TournamentConfig,
    ) -> Result<Self, TournamentError> {
        let arena_id = arena_id.into();
        let mut segments = segments;
        segments.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
        Self::check_segments(&segments)?;
        config.validate()?;
        for w in config.warnings(segments.len()) {
            log::warn!("arena {arena_id}: {w}");
        }
        let mut arena = Self::empty(arena_id, config.k_factor)?;
        arena.record(Event::Init { segments, config })?;
        Ok(arena)
    }

    fn empty(arena_id: String, k: f64) -> Result<Self, TournamentError> {
        Ok(Self {
            arena_id,
            segments: Vec::new(),
            config: TournamentConfig::default(),
            book: RatingBook::new(k)?,
            history: MatchHistory::new(),
            round: 0,
            open: false,
            pending: Vec::new(),
            bye: None,
            completed: Vec::new(),
            events: Vec::new(),
        })
    }

    fn check_segments(segments: &[SegmentRef]) -> Result<(), TournamentError> {
        if segments.len() < 2 {
            return Err(TournamentError::ArenaTooSmall(segments.len()));
        }
        let action = &segments[0].action_label;
        let mut ids = BTreeSet::new();
        for s in segments {
            if &s.action_label != action {
                return Err(TournamentError::MixedActions(action.clone(), s.action_label.clone()));
            }
            if !ids.insert(&s.segment_id) {
                return Err(TournamentError::DuplicateSegment(s.segment_id.to_string()));
            }
            if s.video_id.is_empty() {
                return Err(TournamentError::MissingVideo(s.segment_id.to_string()));
            }
        }
        Ok(())
    }

    pub fn arena_id(&self) -> &str {
        &self.arena_id
    }

    pub fn segments(&self) -> &[SegmentRef] {
        &self.segments
    }

    pub fn segment(&self, id: &PlayerId) -> Option<&SegmentRef> {
        self.segments.iter().find(|s| &s.segment_id == id)
    }

    pub fn config(&self) -> &TournamentConfig {
        &self.config
    }

    pub fn book(&self) -> &RatingBook {
        &self.book
    }

    pub fn history(&self) -> &MatchHistory {
        &self.history
    }

    /// Number of closed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn is_round_open(&self) -> bool {
        self.open
    }

    pub fn pending(&self) -> &[PendingPair] {
        &self.pending
    }

    pub fn pending_pair(&self, pair_id: &str) -> Option<&PendingPair> {
        self.pending.iter().find(|p| p.pair_id == pair_id)
    }

    pub fn bye(&self) -> Option<&PlayerId> {
        self.bye.as_ref()
    }

    pub fn completed_rounds(&self) -> &[CompletedRound] {
        &self.completed
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn policy(&self) -> AggregationPolicy {
        self.config.aggregation_policy()
    }

    /// Rounds this arena will play: the configured count, capped by the
    /// round-robin length in round-robin mode.
    pub fn max_rounds(&self) -> usize {
        match self.config.schedule {
            Schedule::Swiss => self.config.rounds,
            Schedule::RoundRobin => {
                let n = self.segments.len();
                self.config.rounds.min(n - 1 + n % 2)
            }
        }
    }

    pub fn is_finished(&self) -> bool {
        !self.open && self.round >= self.max_rounds()
    }

    pub fn unresolved_count(&self) -> usize {
        self.pending.iter().filter(|p| p.state != PairState::Resolved).count()
    }

    fn players(&self) -> Vec<PlayerId> {
        self.segments.iter().map(|s| s.segment_id.clone()).collect()
    }

    /// Schedules the next round.
    pub fn open_round(&mut self) -> Result<&[PendingPair], TournamentError> {
        let event = self.plan_open_round()?;
        self.record(event)?;
        Ok(&self.pending)
    }

    fn plan_open_round(&self) -> Result<Event, TournamentError> {
        if self.open {
            let count = self.unresolved_count();
            return Err(if count > 0 {
                TournamentError::UnresolvedPairs { count }
            } else {
                TournamentError::RoundAlreadyOpen(self.round + 1)
            });
        }
        if self.round >= self.max_rounds() {
            return Err(TournamentError::MaxRoundsReached(self.max_rounds()));
        }
        let round = self.round + 1;
        let pairing = match self.config.schedule {
            Schedule::Swiss => {
                let standings = match self.config.first_round_shuffle_seed {
                    Some(s) if self.round == 0 => Standings::from_book_shuffled(&self.book, s),
                    _ => Standings::from_book(&self.book),
                };
                let policy = PairingPolicy { lookahead: self.config.pairing_lookahead };
                generate_round_with(&standings, &self.history, policy)?
            }
            Schedule::RoundRobin => {
                round_robin_schedule(&self.players())?
                    .into_iter()
                    .nth(self.round)
                    .expect("round below round-robin length")
            }
        };
        let arena_key = seed::hash_str(&self.arena_id);
        let pairs = pairing
            .matches
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut rng = seed::rng(self.config.presentation_seed, &[arena_key, round as u64, i as u64]);
                let (left, right) = if rng.gen_bool(0.5) {
                    (m.high().clone(), m.low().clone())
                } else {
                    (m.low().clone(), m.high().clone())
                };
                OpenedPair { pair_id: format!("r{round}-m{i}"), left, right }
            })
            .collect();
        Ok(Event::OpenRound { round, pairs, bye: pairing.bye, rematch_count: pairing.rematch_count })
    }

    /// Records one worker's judgment.
    ///
    /// Ratings never change here; only [`Arena::close_round`] updates them.
    pub fn submit_vote(
        &mut self,
        pair_id: &str,
        worker: WorkerId,
        choice: Choice,
        gate: &impl WorkerGate,
    ) -> Result<SubmitStatus, TournamentError> {
        if !self.open {
            return Err(TournamentError::NoOpenRound);
        }
        let pair = self.pending_pair(pair_id).ok_or_else(|| TournamentError::UnknownPair(pair_id.into()))?;
        if pair.state == PairState::Resolved {
            return Err(TournamentError::PairClosed(pair_id.into()));
        }
        if !gate.is_qualified(&worker) {
            return Err(TournamentError::UnqualifiedWorker(worker));
        }
        if pair.has_voted(&worker) {
            return Err(TournamentError::DuplicateVote { worker, pair_id: pair_id.into() });
        }
        if choice == Choice::NoDifference && !self.config.allow_no_difference {
            return Err(crate::aggregation::AggregationError::NoDifferenceDisabled.into());
        }
        let event = Event::Vote {
            pair_id: pair_id.into(),
            worker_id: worker,
            pair: (pair.left.clone(), pair.right.clone()),
            choice,
            is_gold: false,
        };
        self.record(event)?;
        let pair = self.pending_pair(pair_id).expect("pair still pending");
        let policy = self.policy();
        Ok(SubmitStatus { state: pair.state, votes: pair.votes.len(), remaining: pair.remaining_votes(&policy) })
    }

    /// Applies the round's outcomes to the ratings.
    pub fn close_round(&mut self) -> Result<&RatingBook, TournamentError> {
        if !self.open {
            return Err(TournamentError::NoOpenRound);
        }
        let count = self.unresolved_count();
        if count > 0 {
            return Err(TournamentError::UnresolvedPairs { count });
        }
        self.record(Event::CloseRound { round: self.round + 1 })?;
        Ok(&self.book)
    }

    fn record(&mut self, event: Event) -> Result<(), TournamentError> {
        let seq = self.events.last().map_or(1, |e| e.seq + 1);
        let record = EventRecord { seq, arena_id: self.arena_id.clone(), event };
        self.apply(&record)?;
        self.events.push(record);
        Ok(())
    }

    /// Folds one event into the state. Events are validated against the
    /// current state; an open-round event must match the pairing this state
    /// would generate.
    fn apply(&mut self, record: &EventRecord) -> Result<(), TournamentError> {
        let seq = record.seq;
        let fail = |reason: String| TournamentError::Replay { seq, reason };
        match &record.event {
            Event::Init { segments, config } => {
                if !self.events.is_empty() {
                    return Err(fail("init after start of log".into()));
                }
                Self::check_segments(segments)?;
                config.validate()?;
                self.book = RatingBook::with_players(segments.iter().map(|s| s.segment_id.clone()), config.k_factor)?;
                self.segments = segments.clone();
                self.config = config.clone();
            }
            Event::OpenRound { round, pairs, bye, rematch_count } => {
                let expected = self.plan_open_round().map_err(|e| fail(e.to_string()))?;
                if expected != record.event {
                    return Err(fail(format!("round {round} pairing differs from the recomputed schedule")));
                }
                let opened = pairs
                    .iter()
                    .map(|p| {
                        Ok(PendingPair {
                            pair_id: p.pair_id.clone(),
                            pair: UnorderedPair::new(p.left.clone(), p.right.clone())?,
                            left: p.left.clone(),
                            right: p.right.clone(),
                            votes: Vec::new(),
                            state: PairState::Open,
                            outcome: None,
                        })
                    })
                    .collect::<Result<Vec<_>, TournamentError>>()?;
                debug_assert!(*rematch_count <= opened.len());
                self.pending = opened;
                self.bye = bye.clone();
                self.open = true;
            }
            Event::Vote { pair_id, worker_id, pair, choice, is_gold } => {
                if !self.open {
                    return Err(fail("vote while no round is open".into()));
                }
                let policy = self.policy();
                let p = self
                    .pending
                    .iter_mut()
                    .find(|p| &p.pair_id == pair_id)
                    .ok_or_else(|| fail(format!("vote on unknown pair {pair_id}")))?;
                if (&p.left, &p.right) != (&pair.0, &pair.1) {
                    return Err(fail(format!("vote on {pair_id} names the wrong segments")));
                }
                if p.state == PairState::Resolved || p.has_voted(worker_id) {
                    return Err(fail(format!("vote on {pair_id} is not acceptable in its state")));
                }
                p.votes.push(Vote {
                    worker: worker_id.clone(),
                    left: p.left.clone(),
                    right: p.right.clone(),
                    choice: *choice,
                    is_gold: *is_gold,
                    seq,
                });
                let n = p.votes.len();
                if p.state == PairState::Open && n == policy.initial_votes {
                    if needs_escalation(&p.votes, &policy)? {
                        p.state = PairState::AwaitingEscalation;
                    } else {
                        p.outcome = Some(aggregate_votes(&p.votes, &policy)?);
                        p.state = PairState::Resolved;
                    }
                } else if p.state == PairState::AwaitingEscalation && n == policy.escalated_votes() {
                    p.outcome = Some(aggregate_votes(&p.votes, &policy)?);
                    p.state = PairState::Resolved;
                }
            }
            Event::CloseRound { round } => {
                if !self.open || *round != self.round + 1 {
                    return Err(fail(format!("close of round {round} out of order")));
                }
                if self.unresolved_count() > 0 {
                    return Err(fail("close with unresolved pairs".into()));
                }
                let outcomes: Vec<AggregatedOutcome> =
                    self.pending.iter().map(|p| p.outcome.clone().expect("resolved pair has an outcome")).collect();
                let results = outcomes
                    .iter()
                    .map(|o| MatchResult::new(o.left.clone(), o.right.clone(), o.outcome))
                    .collect::<Result<Vec<_>, _>>()?;
                self.book = self.book.apply_round(&results)?;
                let mut matches = Vec::with_capacity(self.pending.len());
                let mut rematch_count = 0;
                for p in &self.pending {
                    if !self.history.record(p.pair.clone()) {
                        rematch_count += 1;
                    }
                    matches.push(p.pair.clone());
                }
                if let Some(b) = &self.bye {
                    self.history.record_bye(b.clone());
                }
                self.completed.push(CompletedRound {
                    round: *round,
                    pairing: RoundPairing { matches, bye: self.bye.take(), rematch_count },
                    outcomes,
                    ranking: Ranking::from_book(&self.book),
                });
                self.pending.clear();
                self.open = false;
                self.round += 1;
            }
        }
        Ok(())
    }

    /// Rebuilds an arena from its log, checking every event along the way.
    pub fn replay(records: impl IntoIterator<Item = EventRecord>) -> Result<Self, TournamentError> {
        let mut iter = records.into_iter();
        let first = iter.next().ok_or(TournamentError::Replay { seq: 0, reason: "empty log".into() })?;
        let Event::Init { config, .. } = &first.event else {
            return Err(TournamentError::Replay { seq: first.seq, reason: "log must start with init".into() });
        };
        let mut arena = Self::empty(first.arena_id.clone(), config.k_factor)?;
        for record in std::iter::once(first).chain(iter) {
            let seq = record.seq;
            if record.arena_id != arena.arena_id {
                return Err(TournamentError::Replay { seq, reason: format!("arena id `{}`", record.arena_id) });
            }
            if let Some(last) = arena.events.last() {
                if seq != last.seq + 1 {
                    return Err(TournamentError::Replay { seq, reason: format!("expected seq {}", last.seq + 1) });
                }
            }
            arena.apply(&record).map_err(|e| match e {
                TournamentError::Replay { .. } => e,
                other => TournamentError::Replay { seq, reason: other.to_string() },
            })?;
            arena.events.push(record);
        }
        Ok(arena)
    }

    pub fn export_leaderboard(&self) -> Ranking {
        Ranking::from_book(&self.book)
    }

    pub fn export_percentiles(&self) -> PercentileTable {
        analysis::to_percentiles(&self.export_leaderboard()).expect("arena has at least two players")
    }

    /// Every aggregated comparison so far, in round order.
    pub fn outcomes(&self) -> impl Iterator<Item = &AggregatedOutcome> {
        self.completed.iter().flat_map(|r| r.outcomes.iter())
    }

    pub fn comparison_count(&self) -> usize {
        self.completed.iter().map(|r| r.outcomes.len()).sum()
    }

    pub fn vote_count(&self) -> usize {
        self.outcomes().map(|o| o.vote_count).sum()
    }

    pub fn agreement_stats(&self) -> Option<AgreementStats> {
        let outcomes: Vec<_> = self.outcomes().cloned().collect();
        analysis::agreement_stats(&outcomes).ok()
    }

    /// Leaderboards after each closed round.
    pub fn rankings_by_round(&self) -> Vec<Ranking> {
        self.completed.iter().map(|r| r.ranking.clone()).collect()
    }

    pub fn consecutive_taus(&self) -> Result<TauSeries, TournamentError> {
        Ok(analysis::consecutive_taus(&self.rankings_by_round())?)
    }

    pub fn total_rematches(&self) -> usize {
        self.completed.iter().map(|r| r.pairing.rematch_count).sum()
    }
}
