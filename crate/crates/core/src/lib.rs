//! Pairwise skill annotation engine.
//!
//! Items of the same kind (video segments of one action) compete in a
//! Swiss-system tournament. Each round pairs items with similar ratings,
//! collects crowd judgments on every pair, resolves them by majority vote and
//! feeds the outcomes into ELO ratings. The resulting ratings give an absolute
//! ranking per arena, which is converted to percentiles for comparison across
//! arenas.
//!
//! - [`ratings`]: expected scores and rating updates
//! - [`pairing`]: Swiss round generation and round-robin schedules
//! - [`aggregation`]: vote aggregation, escalation, worker qualification, gold pairs
//! - [`analysis`]: Kendall tau, percentiles, agreement statistics
//! - [`tournament`]: event-sourced arena state machine, exports, dataset splits
//! - [`reports`]: CSV and vote-log exports
//! - [`simulation`]: synthetic annotators and convergence studies

pub mod aggregation;
pub mod analysis;
pub mod pairing;
pub mod ratings;
pub mod reports;
pub mod seed;
pub mod simulation;
pub mod tournament;

pub use aggregation::{AggregatedOutcome, AggregationPolicy, Choice, Vote, WorkerId, WorkerRecord};
pub use analysis::{kendall_tau, Ranking, TauSeries};
pub use pairing::{generate_round, MatchHistory, RoundPairing, Standings, UnorderedPair};
pub use ratings::{expected_score, MatchResult, Outcome, PlayerId, Rating, RatingBook};
