//! Majority-vote aggregation of worker judgments and gold-standard quality control.
//!
//! A pair is first shown to `initial_votes` distinct workers. If the majority
//! share falls below the escalation threshold it is shown to
//! `escalation_votes` more, and the combined batch decides; an exact tie is a
//! draw.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pairing::UnorderedPair;
use crate::ratings::{Outcome, PlayerId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error("batch mixes pairs: expected ({0}, {1}) in that presented order")]
    InconsistentBatch(PlayerId, PlayerId),
    #[error("batch has {got} votes, expected one of {expected:?}")]
    IncompleteBatch { got: usize, expected: Vec<usize> },
    #[error("worker `{0}` voted twice on the same pair")]
    DuplicateWorker(WorkerId),
    #[error("`no difference` votes are disabled by policy")]
    NoDifferenceDisabled,
    #[error("worker `{worker}` has seen {seen} gold pairs, {required} required before assessment")]
    NotYetAssessable { worker: WorkerId, seen: u32, required: u32 },
    #[error("gold vote on ({0}, {1}) has no known answer")]
    UnknownGoldPair(PlayerId, PlayerId),
    #[error("gold injection rate must lie in [0, 1], got {0}")]
    InvalidRate(f64),
    #[error("positive gold rate needs a non-empty gold pool")]
    EmptyGoldPool,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct WorkerId(String);

impl TryFrom<String> for WorkerId {
    type Error = &'static str;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s).ok_or("worker id must be non-empty")
    }
}

impl From<WorkerId> for String {
    fn from(w: WorkerId) -> Self {
        w.0
    }
}

impl WorkerId {
    pub fn new(id: impl Into<String>) -> Option<Self> {
        let id = id.into();
        (!id.is_empty()).then_some(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for WorkerId {
    fn from(s: &str) -> Self {
        Self::new(s).expect("worker id must be non-empty")
    }
}

/// A worker's answer, relative to the order in which the pair was shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Left,
    Right,
    /// Counted as half a vote for each side; only accepted when the policy allows it.
    NoDifference,
}

impl Choice {
    pub fn flipped(self) -> Self {
        match self {
            Choice::Left => Choice::Right,
            Choice::Right => Choice::Left,
            Choice::NoDifference => Choice::NoDifference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub worker: WorkerId,
    pub left: PlayerId,
    pub right: PlayerId,
    pub choice: Choice,
    pub is_gold: bool,
    pub seq: u64,
}

impl Vote {
    pub fn pair(&self) -> Option<UnorderedPair> {
        UnorderedPair::new(self.left.clone(), self.right.clone()).ok()
    }

    /// Player the vote prefers, `None` for a no-difference answer.
    pub fn preferred(&self) -> Option<&PlayerId> {
        match self.choice {
            Choice::Left => Some(&self.left),
            Choice::Right => Some(&self.right),
            Choice::NoDifference => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationPolicy {
    pub initial_votes: usize,
    pub escalation_votes: usize,
    /// Initial batches whose majority share is strictly below this escalate.
    pub escalation_threshold: f64,
    pub allow_no_difference: bool,
}

impl Default for AggregationPolicy {
    fn default() -> Self {
        Self { initial_votes: 5, escalation_votes: 3, escalation_threshold: 0.8, allow_no_difference: false }
    }
}

impl AggregationPolicy {
    pub fn validate(&self) -> Result<(), AggregationError> {
        if self.initial_votes == 0 {
            return Err(AggregationError::InvalidPolicy("initial_votes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.escalation_threshold) {
            return Err(AggregationError::InvalidPolicy("escalation_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn escalated_votes(&self) -> usize {
        self.initial_votes + self.escalation_votes
    }
}

/// Majority-resolved result of one pair, expressed in presented order (left = first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedOutcome {
    pub left: PlayerId,
    pub right: PlayerId,
    pub outcome: Outcome,
    pub vote_count: usize,
    pub votes_left: f64,
    pub votes_right: f64,
    pub agreement_rate: f64,
    pub vote_difference: f64,
    pub escalated: bool,
}

/// Vote totals in half-vote units so no-difference answers stay exact.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    left_halves: u32,
    right_halves: u32,
}

impl Tally {
    fn add(&mut self, c: Choice) {
        match c {
            Choice::Left => self.left_halves += 2,
            Choice::Right => self.right_halves += 2,
            Choice::NoDifference => {
                self.left_halves += 1;
                self.right_halves += 1;
            }
        }
    }

    fn total(&self) -> f64 {
        (self.left_halves + self.right_halves) as f64 / 2.0
    }

    fn agreement(&self) -> f64 {
        self.left_halves.max(self.right_halves) as f64 / (self.left_halves + self.right_halves) as f64
    }
}

fn tally(votes: &[Vote], policy: &AggregationPolicy, allowed: &[usize]) -> Result<Tally, AggregationError> {
    let first = votes.first().ok_or_else(|| AggregationError::IncompleteBatch {
        got: 0,
        expected: allowed.to_vec(),
    })?;
    let mut workers = HashSet::new();
    let mut t = Tally::default();
    for v in votes {
        if v.left != first.left || v.right != first.right {
            return Err(AggregationError::InconsistentBatch(first.left.clone(), first.right.clone()));
        }
        if !workers.insert(&v.worker) {
            return Err(AggregationError::DuplicateWorker(v.worker.clone()));
        }
        if v.choice == Choice::NoDifference && !policy.allow_no_difference {
            return Err(AggregationError::NoDifferenceDisabled);
        }
        t.add(v.choice);
    }
    if !allowed.contains(&votes.len()) {
        return Err(AggregationError::IncompleteBatch { got: votes.len(), expected: allowed.to_vec() });
    }
    Ok(t)
}

pub fn aggregate_votes(votes: &[Vote], policy: &AggregationPolicy) -> Result<AggregatedOutcome, AggregationError> {
    let allowed = [policy.initial_votes, policy.escalated_votes()];
    let t = tally(votes, policy, &allowed)?;
    let outcome = match t.left_halves.cmp(&t.right_halves) {
        std::cmp::Ordering::Greater => Outcome::FirstWins,
        std::cmp::Ordering::Less => Outcome::SecondWins,
        std::cmp::Ordering::Equal => Outcome::Draw,
    };
    let votes_left = t.left_halves as f64 / 2.0;
    let votes_right = t.right_halves as f64 / 2.0;
    Ok(AggregatedOutcome {
        left: votes[0].left.clone(),
        right: votes[0].right.clone(),
        outcome,
        vote_count: votes.len(),
        votes_left,
        votes_right,
        agreement_rate: t.agreement(),
        vote_difference: (votes_left - votes_right).abs(),
        escalated: policy.escalation_votes > 0 && votes.len() == policy.escalated_votes(),
    })
}

/// Whether a complete initial batch is too split to decide on its own.
pub fn needs_escalation(votes: &[Vote], policy: &AggregationPolicy) -> Result<bool, AggregationError> {
    let t = tally(votes, policy, &[policy.initial_votes])?;
    debug_assert!(t.total() > 0.0);
    Ok(policy.escalation_votes > 0 && t.agreement() < policy.escalation_threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualificationPolicy {
    /// Approval rate must be strictly above this.
    pub min_approval_rate: f64,
    pub min_gold: u32,
    pub gold_threshold: f64,
}

impl Default for QualificationPolicy {
    fn default() -> Self {
        Self { min_approval_rate: 0.90, min_gold: 5, gold_threshold: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRecord {
    pub worker: WorkerId,
    pub approval_rate: f64,
    pub gold_correct: u32,
    pub gold_seen: u32,
    pub qualified: bool,
}

impl WorkerRecord {
    pub fn new(worker: WorkerId, approval_rate: f64) -> Self {
        Self { worker, approval_rate, gold_correct: 0, gold_seen: 0, qualified: false }
    }

    /// Adds gold results; `correct` is clamped so it never exceeds `seen`.
    pub fn apply_gold(&mut self, delta: GoldDelta) {
        self.gold_seen += delta.seen;
        self.gold_correct = (self.gold_correct + delta.correct).min(self.gold_seen);
    }

    pub fn gold_accuracy(&self) -> Option<f64> {
        (self.gold_seen > 0).then(|| self.gold_correct as f64 / self.gold_seen as f64)
    }
}

/// Recomputes the `qualified` flag, or reports that too few gold pairs have been seen.
pub fn qualify_worker(record: &WorkerRecord, policy: &QualificationPolicy) -> Result<WorkerRecord, AggregationError> {
    if record.gold_seen < policy.min_gold || record.gold_seen == 0 {
        return Err(AggregationError::NotYetAssessable {
            worker: record.worker.clone(),
            seen: record.gold_seen,
            required: policy.min_gold.max(1),
        });
    }
    let accuracy = record.gold_correct as f64 / record.gold_seen as f64;
    Ok(WorkerRecord {
        qualified: record.approval_rate > policy.min_approval_rate && accuracy >= policy.gold_threshold,
        ..record.clone()
    })
}

/// Known winner of every gold-standard pair.
pub type GoldAnswers = HashMap<UnorderedPair, PlayerId>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldDelta {
    pub seen: u32,
    pub correct: u32,
}

/// Scores the gold votes in `votes`; non-gold votes are ignored.
pub fn score_worker_on_golds(votes: &[Vote], answers: &GoldAnswers) -> Result<GoldDelta, AggregationError> {
    let mut delta = GoldDelta::default();
    for v in votes.iter().filter(|v| v.is_gold) {
        let truth = v
            .pair()
            .and_then(|p| answers.get(&p))
            .ok_or_else(|| AggregationError::UnknownGoldPair(v.left.clone(), v.right.clone()))?;
        delta.seen += 1;
        if v.preferred() == Some(truth) {
            delta.correct += 1;
        }
    }
    Ok(delta)
}

/// A task list entry. The gold marker is kept out of [`consumer_view`].
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSlot<T> {
    item: T,
    gold: bool,
}

impl<T> TaskSlot<T> {
    pub fn item(&self) -> &T {
        &self.item
    }

    pub fn is_gold(&self) -> bool {
        self.gold
    }
}

/// Interleaves gold items into `tasks`: after each task, with probability `rate`,
/// a gold item is placed immediately before or after it.
pub fn inject_gold<T: Clone>(
    tasks: &[T],
    gold_pool: &[T],
    rate: f64,
    seed: u64,
) -> Result<Vec<TaskSlot<T>>, AggregationError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(AggregationError::InvalidRate(rate));
    }
    if rate > 0.0 && gold_pool.is_empty() {
        return Err(AggregationError::EmptyGoldPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..gold_pool.len()).collect();
    order.shuffle(&mut rng);
    let mut next_gold = 0usize;
    let mut out = Vec::with_capacity(tasks.len());
    for task in tasks {
        let task_slot = TaskSlot { item: task.clone(), gold: false };
        if rate > 0.0 && rng.gen_bool(rate) {
            let gold = TaskSlot { item: gold_pool[order[next_gold % order.len()]].clone(), gold: true };
            next_gold += 1;
            if rng.gen_bool(0.5) {
                out.push(gold);
                out.push(task_slot);
            } else {
                out.push(task_slot);
                out.push(gold);
            }
        } else {
            out.push(task_slot);
        }
    }
    Ok(out)
}

/// What a worker sees: the items, with gold markers stripped.
pub fn consumer_view<T>(slots: &[TaskSlot<T>]) -> Vec<&T> {
    slots.iter().map(TaskSlot::item).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn votes_from(pattern: &[Choice]) -> Vec<Vote> {
        pattern
            .iter()
            .enumerate()
            .map(|(i, &choice)| Vote {
                worker: WorkerId::from(format!("w{i}").as_str()),
                left: "L".into(),
                right: "R".into(),
                choice,
                is_gold: false,
                seq: i as u64,
            })
            .collect()
    }

    fn split(left: usize, right: usize) -> Vec<Vote> {
        let mut p = vec![Choice::Left; left];
        p.extend(vec![Choice::Right; right]);
        votes_from(&p)
    }

    /// Independent oracle: count bits directly.
    fn oracle(bits: u32, len: usize) -> (Outcome, f64, f64) {
        let left = (0..len).filter(|i| bits & (1 << i) != 0).count();
        let right = len - left;
        let outcome = if left > right {
            Outcome::FirstWins
        } else if right > left {
            Outcome::SecondWins
        } else {
            Outcome::Draw
        };
        (outcome, left.max(right) as f64 / len as f64, (left as f64 - right as f64).abs())
    }

    fn pattern(bits: u32, len: usize) -> Vec<Choice> {
        (0..len).map(|i| if bits & (1 << i) != 0 { Choice::Left } else { Choice::Right }).collect()
    }

    #[test]
    fn four_one_is_consensus() {
        let p = AggregationPolicy::default();
        let votes = split(4, 1);
        let out = aggregate_votes(&votes, &p).unwrap();
        assert_eq!(out.outcome, Outcome::FirstWins);
        assert_eq!(out.agreement_rate, 0.8);
        assert_eq!(out.vote_difference, 3.0);
        assert!(!out.escalated);
        assert!(!needs_escalation(&votes, &p).unwrap());
        assert!(!needs_escalation(&split(5, 0), &p).unwrap());
    }

    #[test]
    fn three_two_escalates_then_resolves() {
        let p = AggregationPolicy::default();
        let mut votes = split(3, 2);
        assert!(needs_escalation(&votes, &p).unwrap());
        let mut extra = votes_from(&[Choice::Left, Choice::Left, Choice::Right]);
        for (i, v) in extra.iter_mut().enumerate() {
            v.worker = WorkerId::from(format!("x{i}").as_str());
        }
        votes.extend(extra);
        let out = aggregate_votes(&votes, &p).unwrap();
        assert_eq!(out.outcome, Outcome::FirstWins);
        assert_eq!(out.vote_count, 8);
        assert_eq!((out.votes_left, out.votes_right), (5.0, 3.0));
        assert!(out.escalated);
    }

    #[test]
    fn four_four_is_draw() {
        let out = aggregate_votes(&split(4, 4), &AggregationPolicy::default()).unwrap();
        assert_eq!(out.outcome, Outcome::Draw);
        assert_eq!(out.agreement_rate, 0.5);
        assert_eq!(out.vote_difference, 0.0);
    }

    #[test]
    fn exhaustive_truth_table() {
        let p = AggregationPolicy::default();
        for len in [5usize, 8] {
            for bits in 0..(1u32 << len) {
                let votes = votes_from(&pattern(bits, len));
                let out = aggregate_votes(&votes, &p).unwrap();
                let (o, agree, diff) = oracle(bits, len);
                assert_eq!(out.outcome, o);
                assert_eq!(out.agreement_rate, agree);
                assert_eq!(out.vote_difference, diff);
                assert_eq!(out.escalated, len == 8);
                if out.outcome != Outcome::Draw {
                    let vc = out.vote_count as f64;
                    assert!((out.vote_difference - vc * (2.0 * out.agreement_rate - 1.0)).abs() < 1e-12);
                }
                if len == 5 {
                    let left = bits.count_ones();
                    assert_eq!(needs_escalation(&votes, &p).unwrap(), left == 2 || left == 3);
                }
            }
        }
    }

    #[test]
    fn presentation_order_invariance() {
        let p = AggregationPolicy::default();
        for len in [5usize, 8] {
            for bits in 0..(1u32 << len) {
                let votes = votes_from(&pattern(bits, len));
                let mirrored: Vec<Vote> = votes
                    .iter()
                    .map(|v| Vote {
                        left: v.right.clone(),
                        right: v.left.clone(),
                        choice: v.choice.flipped(),
                        ..v.clone()
                    })
                    .collect();
                let a = aggregate_votes(&votes, &p).unwrap();
                let b = aggregate_votes(&mirrored, &p).unwrap();
                assert_eq!(a.outcome.mirrored(), b.outcome);
                assert_eq!(a.agreement_rate, b.agreement_rate);
                assert_eq!(a.vote_difference, b.vote_difference);
            }
        }
    }

    #[test]
    fn batch_errors() {
        let p = AggregationPolicy::default();
        let mut votes = split(3, 1);
        assert!(matches!(aggregate_votes(&votes, &p), Err(AggregationError::IncompleteBatch { got: 4, .. })));
        assert!(aggregate_votes(&[], &p).is_err());
        votes.push(Vote { left: "X".into(), ..votes[0].clone() });
        votes.last_mut().unwrap().worker = "other".into();
        assert!(matches!(aggregate_votes(&votes, &p), Err(AggregationError::InconsistentBatch(..))));

        let mut dup = split(5, 0);
        dup[4].worker = dup[0].worker.clone();
        assert_eq!(aggregate_votes(&dup, &p), Err(AggregationError::DuplicateWorker("w0".into())));

        let nd = votes_from(&[Choice::Left, Choice::Left, Choice::Left, Choice::Right, Choice::NoDifference]);
        assert_eq!(aggregate_votes(&nd, &p), Err(AggregationError::NoDifferenceDisabled));
        assert!(needs_escalation(&split(4, 4), &p).is_err());
    }

    #[test]
    fn no_difference_counts_half() {
        let p = AggregationPolicy { allow_no_difference: true, ..Default::default() };
        let nd = votes_from(&[Choice::Left, Choice::Left, Choice::Left, Choice::Right, Choice::NoDifference]);
        let out = aggregate_votes(&nd, &p).unwrap();
        assert_eq!((out.votes_left, out.votes_right), (3.5, 1.5));
        assert_eq!(out.agreement_rate, 0.7);
        assert_eq!(out.vote_difference, 2.0);
        assert!(needs_escalation(&nd, &p).unwrap());
    }

    #[test]
    fn qualification() {
        let p = QualificationPolicy::default();
        let rec = |approval: f64, correct: u32, seen: u32| WorkerRecord {
            worker: "w".into(),
            approval_rate: approval,
            gold_correct: correct,
            gold_seen: seen,
            qualified: false,
        };
        assert!(qualify_worker(&rec(0.95, 5, 5), &p).unwrap().qualified);
        assert!(!qualify_worker(&rec(0.85, 5, 5), &p).unwrap().qualified);
        assert!(!qualify_worker(&rec(0.90, 5, 5), &p).unwrap().qualified);
        assert!(!qualify_worker(&rec(0.95, 3, 5), &p).unwrap().qualified);
        assert!(qualify_worker(&rec(0.95, 4, 5), &p).unwrap().qualified);
        assert!(matches!(
            qualify_worker(&rec(0.99, 4, 4), &p),
            Err(AggregationError::NotYetAssessable { seen: 4, required: 5, .. })
        ));
    }

    fn gold_vote(left: &str, right: &str, choice: Choice) -> Vote {
        Vote { worker: "w".into(), left: left.into(), right: right.into(), choice, is_gold: true, seq: 0 }
    }

    #[test]
    fn gold_scoring() {
        let mut answers = GoldAnswers::new();
        answers.insert(UnorderedPair::new("A".into(), "B".into()).unwrap(), "A".into());
        answers.insert(UnorderedPair::new("C".into(), "D".into()).unwrap(), "D".into());

        let all_right = [
            gold_vote("A", "B", Choice::Left),
            gold_vote("B", "A", Choice::Right),
            gold_vote("C", "D", Choice::Right),
        ];
        assert_eq!(score_worker_on_golds(&all_right, &answers).unwrap(), GoldDelta { seen: 3, correct: 3 });
        assert_eq!(score_worker_on_golds(&[], &answers).unwrap(), GoldDelta::default());

        let mut four = all_right.to_vec();
        four.push(gold_vote("D", "C", Choice::Right));
        assert_eq!(score_worker_on_golds(&four, &answers).unwrap(), GoldDelta { seen: 4, correct: 3 });

        let mut regular = gold_vote("X", "Y", Choice::Left);
        regular.is_gold = false;
        assert_eq!(score_worker_on_golds(&[regular], &answers).unwrap(), GoldDelta::default());
        assert!(matches!(
            score_worker_on_golds(&[gold_vote("X", "Y", Choice::Left)], &answers),
            Err(AggregationError::UnknownGoldPair(..))
        ));

        let mut rec = WorkerRecord::new("w".into(), 0.95);
        rec.apply_gold(GoldDelta { seen: 4, correct: 3 });
        assert_eq!((rec.gold_correct, rec.gold_seen), (3, 4));
    }

    #[test]
    fn gold_injection() {
        let tasks: Vec<u32> = (0..100).collect();
        let pool: Vec<u32> = (1000..1200).collect();

        let none = inject_gold(&tasks, &pool, 0.0, 7).unwrap();
        assert_eq!(consumer_view(&none).into_iter().copied().collect::<Vec<_>>(), tasks);
        assert_eq!(inject_gold(&tasks, &[], 0.0, 7).unwrap().len(), 100);

        let all = inject_gold(&tasks, &pool, 1.0, 7).unwrap();
        assert_eq!(all.len(), 200);
        assert_eq!(all.iter().filter(|s| s.is_gold()).count(), 100);
        let distinct: HashSet<_> = all.iter().filter(|s| s.is_gold()).map(|s| *s.item()).collect();
        assert_eq!(distinct.len(), 100);

        let a = inject_gold(&tasks, &pool, 0.2, 42).unwrap();
        let b = inject_gold(&tasks, &pool, 0.2, 42).unwrap();
        assert_eq!(a, b);
        let golds = a.iter().filter(|s| s.is_gold()).count();
        // Binomial(100, 0.2): mean 20, sd 4; 99% two-sided interval is roughly [10, 31].
        assert!((10..=31).contains(&golds), "{golds} gold items");
        let regular: Vec<u32> = a.iter().filter(|s| !s.is_gold()).map(|s| *s.item()).collect();
        assert_eq!(regular, tasks);

        assert_eq!(inject_gold(&tasks, &[], 0.5, 1), Err(AggregationError::EmptyGoldPool));
        assert_eq!(inject_gold(&tasks, &pool, 1.5, 1), Err(AggregationError::InvalidRate(1.5)));
    }
}
