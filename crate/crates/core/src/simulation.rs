//! Synthetic annotators and convergence studies.
//!
//! A simulated tournament assigns every segment a latent skill, runs a real
//! [`Arena`] end to end with votes sampled from an [`AnnotatorModel`], and
//! records how the leaderboard tracks the latent order round by round.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{Choice, WorkerId};
use crate::analysis::{self, kendall_tau, AnalysisError, Ranking, TauSeries};
use crate::ratings::{PlayerId, DEFAULT_K_FACTOR};
use crate::seed;
use crate::tournament::{AdmitAll, Arena, Schedule, SegmentRef, TournamentConfig, TournamentError};

const SKILL_STREAM: u64 = 1;
const VOTE_STREAM: u64 = 2;
const PRESENTATION_STREAM: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("accuracy must lie in [0.5, 1], got {0}")]
    InvalidAccuracy(f64),
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("a simulation needs at least 2 players, got {0}")]
    TooFewPlayers(usize),
    #[error("a simulation needs at least one seed")]
    NoSeeds,
    #[error(transparent)]
    Tournament(#[from] TournamentError),
}

/// True skill per player; higher is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSkills {
    pub theta: BTreeMap<PlayerId, f64>,
}

impl LatentSkills {
    /// Skills `0, 1, ..., n-1` dealt to players `seg000..` in a seeded random order.
    pub fn evenly_spaced(n: usize, seed: u64) -> Self {
        let mut values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        values.shuffle(&mut seed::rng(seed, &[SKILL_STREAM]));
        let theta = values.into_iter().enumerate().map(|(i, v)| (player_id(i), v)).collect();
        Self { theta }
    }

    pub fn ranking(&self) -> Ranking {
        Ranking::new(self.theta.iter().map(|(p, t)| (p.clone(), *t)).collect()).expect("finite distinct skills")
    }

    pub fn get(&self, p: &PlayerId) -> f64 {
        self.theta[p]
    }
}

fn player_id(i: usize) -> PlayerId {
    PlayerId::from(format!("seg{i:03}").as_str())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum AnnotatorModel {
    Oracle,
    FixedAccuracy(f64),
    /// Picks left with probability `1 / (1 + exp(-(theta_left - theta_right) / T))`.
    Logistic(f64),
}

impl Default for AnnotatorModel {
    fn default() -> Self {
        AnnotatorModel::FixedAccuracy(0.7)
    }
}

impl AnnotatorModel {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            AnnotatorModel::Oracle => Ok(()),
            AnnotatorModel::FixedAccuracy(p) if (0.5..=1.0).contains(&p) => Ok(()),
            AnnotatorModel::FixedAccuracy(p) => Err(SimError::InvalidAccuracy(p)),
            AnnotatorModel::Logistic(t) if t.is_finite() && t > 0.0 => Ok(()),
            AnnotatorModel::Logistic(t) => Err(SimError::InvalidTemperature(t)),
        }
    }

    /// Probability of choosing the left item.
    pub fn p_left(&self, theta_left: f64, theta_right: f64) -> f64 {
        let gap = theta_left - theta_right;
        match *self {
            AnnotatorModel::Oracle => match gap.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => 1.0,
                Some(std::cmp::Ordering::Less) => 0.0,
                _ => 0.5,
            },
            AnnotatorModel::FixedAccuracy(p) => {
                if gap > 0.0 {
                    p
                } else if gap < 0.0 {
                    1.0 - p
                } else {
                    0.5
                }
            }
            AnnotatorModel::Logistic(t) => 1.0 / (1.0 + (-gap / t).exp()),
        }
    }

    pub fn sample_vote<R: Rng + ?Sized>(&self, theta_left: f64, theta_right: f64, rng: &mut R) -> Result<Choice, SimError> {
        self.validate()?;
        let p = self.p_left(theta_left, theta_right);
        Ok(if rng.gen_bool(p) { Choice::Left } else { Choice::Right })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_players: usize,
    /// Swiss rounds; ignored in round-robin mode, which plays the full schedule.
    pub rounds: usize,
    pub votes_initial: usize,
    pub votes_escalation: usize,
    pub escalation_threshold: f64,
    pub k_factor: f64,
    pub model: AnnotatorModel,
    pub seeds: Vec<u64>,
    pub mode: Schedule,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_players: 16,
            rounds: 6,
            votes_initial: 5,
            votes_escalation: 3,
            escalation_threshold: 0.8,
            k_factor: DEFAULT_K_FACTOR,
            model: AnnotatorModel::default(),
            seeds: (0..50).collect(),
            mode: Schedule::Swiss,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_players < 2 {
            return Err(SimError::TooFewPlayers(self.n_players));
        }
        if self.seeds.is_empty() {
            return Err(SimError::NoSeeds);
        }
        self.model.validate()?;
        self.tournament_config(0).validate()?;
        Ok(())
    }

    fn tournament_config(&self, seed: u64) -> TournamentConfig {
        let rounds = match self.mode {
            Schedule::Swiss => self.rounds,
            Schedule::RoundRobin => self.n_players - 1 + self.n_players % 2,
        };
        TournamentConfig {
            rounds,
            k_factor: self.k_factor,
            votes_initial: self.votes_initial,
            votes_escalation: self.votes_escalation,
            escalation_threshold: self.escalation_threshold,
            presentation_seed: seed::derive(seed, &[PRESENTATION_STREAM]),
            schedule: self.mode,
            ..TournamentConfig::default()
        }
    }

    pub fn catalog(&self) -> Vec<SegmentRef> {
        (0..self.n_players)
            .map(|i| SegmentRef {
                segment_id: player_id(i),
                video_id: format!("video{i:03}"),
                action_label: "synthetic".into(),
                media_url: String::new(),
            })
            .collect()
    }
}

/// One seed's tournament.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    /// Entry `r - 1` is tau between the leaderboard after round `r` and the latent order.
    pub tau_vs_truth: Vec<f64>,
    pub consecutive: TauSeries,
    pub comparisons: usize,
    pub votes: usize,
    pub escalations: usize,
    pub rematches: usize,
}

impl SeedRun {
    pub fn final_tau(&self) -> f64 {
        self.tau_vs_truth.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Option<Self> {
        Some(Self {
            mean: analysis::mean(xs)?,
            median: analysis::quantile(xs, 0.5)?,
            q1: analysis::quantile(xs, 0.25)?,
            q3: analysis::quantile(xs, 0.75)?,
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Cross-seed mean of one round's value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub round: usize,
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub runs: Vec<SeedRun>,
    pub final_tau_vs_truth: Summary,
    pub final_consecutive_tau: Option<Summary>,
    pub mean_consecutive_tau: Vec<SeriesPoint>,
    pub mean_tau_vs_truth: Vec<SeriesPoint>,
}

/// Tau with an all-tied ranking, which has no defined correlation, scored as 0.
fn tau_or_zero(a: &Ranking, b: &Ranking) -> Result<f64, SimError> {
    match kendall_tau(a, b) {
        Ok(t) => Ok(t),
        Err(AnalysisError::Degenerate) => Ok(0.0),
        Err(e) => Err(TournamentError::from(e).into()),
    }
}

pub fn run_seed(config: &SimConfig, seed: u64) -> Result<SeedRun, SimError> {
    config.validate()?;
    Ok(run_arena(config, seed)?.0)
}

/// Runs one seed and also returns the finished arena (for log export).
pub fn run_arena(config: &SimConfig, seed: u64) -> Result<(SeedRun, Arena), SimError> {
    let skills = LatentSkills::evenly_spaced(config.n_players, seed);
    let truth = skills.ranking();
    let mut arena = Arena::init(format!("sim-{seed}"), config.catalog(), config.tournament_config(seed))?;
    let mut rng = seed::rng(seed, &[VOTE_STREAM]);
    let mut worker = 0u64;
    let mut tau_vs_truth = Vec::new();
    while !arena.is_finished() {
        let pairs: Vec<_> = arena.open_round()?.iter().map(|p| (p.pair_id.clone(), p.left.clone(), p.right.clone())).collect();
        let policy = arena.policy();
        for (pair_id, left, right) in pairs {
            let (tl, tr) = (skills.get(&left), skills.get(&right));
            while arena.pending_pair(&pair_id).expect("pair opened").remaining_votes(&policy) > 0 {
                let choice = config.model.sample_vote(tl, tr, &mut rng)?;
                worker += 1;
                let id = WorkerId::new(format!("synthetic-{worker}")).expect("non-empty id");
                arena.submit_vote(&pair_id, id, choice, &AdmitAll)?;
            }
        }
        arena.close_round()?;
        tau_vs_truth.push(tau_or_zero(&arena.export_leaderboard(), &truth)?);
    }
    let rankings = arena.rankings_by_round();
    let points = rankings
        .windows(2)
        .enumerate()
        .map(|(i, w)| tau_or_zero(&w[0], &w[1]).map(|t| (i + 1, t)))
        .collect::<Result<_, _>>()?;
    let run = SeedRun {
        seed,
        tau_vs_truth,
        consecutive: TauSeries { points },
        comparisons: arena.comparison_count(),
        votes: arena.vote_count(),
        escalations: arena.outcomes().filter(|o| o.escalated).count(),
        rematches: arena.total_rematches(),
    };
    Ok((run, arena))
}

pub fn run_tournament_sim(config: &SimConfig) -> Result<SimReport, SimError> {
    config.validate()?;
    #[cfg(feature = "parallel")]
    let runs = {
        use rayon::prelude::*;
        config.seeds.par_iter().map(|&s| run_arena(config, s).map(|r| r.0)).collect::<Result<Vec<_>, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs = config.seeds.iter().map(|&s| run_arena(config, s).map(|r| r.0)).collect::<Result<Vec<_>, _>>()?;
    Ok(SimReport::from_runs(config.clone(), runs))
}

fn series(rows: &[Vec<(usize, f64)>]) -> Vec<SeriesPoint> {
    let mut by_round: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in rows {
        for &(r, v) in row {
            by_round.entry(r).or_default().push(v);
        }
    }
    by_round
        .into_iter()
        .map(|(round, xs)| {
            let mean = analysis::mean(&xs).expect("non-empty");
            let var = if xs.len() > 1 {
                xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
            } else {
                0.0
            };
            SeriesPoint { round, mean, std_err: (var / xs.len() as f64).sqrt() }
        })
        .collect()
}

impl SimReport {
    fn from_runs(config: SimConfig, runs: Vec<SeedRun>) -> Self {
        let finals: Vec<f64> = runs.iter().map(SeedRun::final_tau).collect();
        let consecutive_finals: Vec<f64> = runs.iter().filter_map(|r| r.consecutive.last()).collect();
        let consecutive: Vec<_> = runs.iter().map(|r| r.consecutive.points.clone()).collect();
        let vs_truth: Vec<Vec<(usize, f64)>> =
            runs.iter().map(|r| r.tau_vs_truth.iter().enumerate().map(|(i, t)| (i + 1, *t)).collect()).collect();
        Self {
            final_tau_vs_truth: Summary::of(&finals).expect("at least one seed"),
            final_consecutive_tau: Summary::of(&consecutive_finals),
            mean_consecutive_tau: series(&consecutive),
            mean_tau_vs_truth: series(&vs_truth),
            config,
            runs,
        }
    }

    pub fn total_comparisons(&self) -> usize {
        self.runs.iter().map(|r| r.comparisons).sum()
    }

    /// Fraction of aggregated pairs that needed escalation votes.
    pub fn escalation_fraction(&self) -> f64 {
        let pairs: usize = self.total_comparisons();
        let esc: usize = self.runs.iter().map(|r| r.escalations).sum();
        if pairs == 0 { 0.0 } else { esc as f64 / pairs as f64 }
    }

    /// Per-round rows: `seed,mode,round,tau_vs_truth,consecutive_tau,comparisons,votes`.
    ///
    /// `consecutive_tau` on row `r` compares rounds `r - 1` and `r`, so it is empty on round 1.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["seed", "mode", "round", "tau_vs_truth", "consecutive_tau", "comparisons", "votes"])?;
        let mode = match self.config.mode {
            Schedule::Swiss => "swiss",
            Schedule::RoundRobin => "round_robin",
        };
        for run in &self.runs {
            let rounds = run.tau_vs_truth.len().max(1);
            for (i, tau) in run.tau_vs_truth.iter().enumerate() {
                let consecutive = i
                    .checked_sub(1)
                    .and_then(|j| run.consecutive.points.get(j))
                    .map(|p| p.1.to_string())
                    .unwrap_or_default();
                let cum = |total: usize| total * (i + 1) / rounds;
                out.write_record([
                    run.seed.to_string(),
                    mode.to_string(),
                    (i + 1).to_string(),
                    tau.to_string(),
                    consecutive,
                    cum(run.comparisons).to_string(),
                    cum(run.votes).to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "seeds": self.runs.len(),
            "final_tau_vs_truth": self.final_tau_vs_truth,
            "final_consecutive_tau": self.final_consecutive_tau,
            "mean_consecutive_tau": self.mean_consecutive_tau,
            "mean_tau_vs_truth": self.mean_tau_vs_truth,
            "comparisons_per_seed": self.runs.first().map(|r| r.comparisons),
            "escalation_fraction": self.escalation_fraction(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedDelta {
    pub seed: u64,
    pub swiss_tau: f64,
    pub round_robin_tau: f64,
}

impl SeedDelta {
    pub fn improvement(&self) -> f64 {
        self.round_robin_tau - self.swiss_tau
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedReport {
    pub swiss: SimReport,
    pub round_robin: SimReport,
    pub deltas: Vec<SeedDelta>,
    pub swiss_comparisons: usize,
    pub round_robin_comparisons: usize,
}

impl PairedReport {
    pub fn comparison_delta(&self) -> isize {
        self.round_robin_comparisons as isize - self.swiss_comparisons as isize
    }

    /// Extra comparisons as a fraction of the round-robin total.
    pub fn comparison_delta_fraction(&self) -> f64 {
        self.comparison_delta() as f64 / self.round_robin_comparisons as f64
    }

    pub fn mean_improvement(&self) -> f64 {
        analysis::mean(&self.deltas.iter().map(SeedDelta::improvement).collect::<Vec<_>>()).unwrap_or(0.0)
    }

    /// Fraction of seeds where round robin is at least as close to the truth.
    pub fn dominance_fraction(&self) -> f64 {
        let wins = self.deltas.iter().filter(|d| d.round_robin_tau >= d.swiss_tau).count();
        wins as f64 / self.deltas.len() as f64
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "swiss": self.swiss.summary_json(),
            "round_robin": self.round_robin.summary_json(),
            "swiss_comparisons": self.swiss_comparisons,
            "round_robin_comparisons": self.round_robin_comparisons,
            "comparison_delta": self.comparison_delta(),
            "comparison_delta_fraction": self.comparison_delta_fraction(),
            "mean_tau_improvement": self.mean_improvement(),
            "dominance_fraction": self.dominance_fraction(),
        })
    }
}

/// Runs the same seeds under Swiss and round-robin scheduling.
pub fn compare_swiss_vs_roundrobin(config: &SimConfig) -> Result<PairedReport, SimError> {
    let swiss = run_tournament_sim(&SimConfig { mode: Schedule::Swiss, ..config.clone() })?;
    let round_robin = run_tournament_sim(&SimConfig { mode: Schedule::RoundRobin, ..config.clone() })?;
    let deltas = swiss
        .runs
        .iter()
        .zip(&round_robin.runs)
        .map(|(s, r)| SeedDelta { seed: s.seed, swiss_tau: s.final_tau(), round_robin_tau: r.final_tau() })
        .collect();
    Ok(PairedReport {
        swiss_comparisons: swiss.runs[0].comparisons,
        round_robin_comparisons: round_robin.runs[0].comparisons,
        swiss,
        round_robin,
        deltas,
    })
}
