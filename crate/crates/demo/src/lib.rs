//! WebAssembly entry points for the static demo page in `www/`.
//!
//! Each exported function takes a JSON request string and returns a JSON
//! response string. The typed functions behind them ([`rating_update`],
//! [`swiss_trajectory`], [`convergence`]) are plain Rust and are what the
//! tests exercise.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wasm_bindgen::prelude::*;

use skillarena_core::analysis::Ranking;
use skillarena_core::ratings::{MatchResult, Outcome, PlayerId, Rating, RatingBook, RatingError, DEFAULT_K_FACTOR};
use skillarena_core::simulation::{
    compare_swiss_vs_roundrobin, run_arena, AnnotatorModel, LatentSkills, SeriesPoint, SimConfig, SimError,
};
use skillarena_core::expected_score;

/// Largest field the page may request; keeps a click responsive.
pub const MAX_PLAYERS: usize = 64;
pub const MAX_SEEDS: usize = 200;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("request: {0}")]
    Request(#[from] serde_json::Error),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("{0}")]
    Limit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchScore {
    AWins,
    Draw,
    BWins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRequest {
    pub rating_a: f64,
    pub rating_b: f64,
    pub result: MatchScore,
    #[serde(default = "default_k")]
    pub k_factor: f64,
}

fn default_k() -> f64 {
    DEFAULT_K_FACTOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateResponse {
    pub expected_a: f64,
    pub expected_b: f64,
    pub new_a: f64,
    pub new_b: f64,
}

/// One ELO update between two players.
pub fn rating_update(req: &UpdateRequest) -> Result<UpdateResponse, DemoError> {
    let (a, b) = (PlayerId::from("a"), PlayerId::from("b"));
    let mut book = RatingBook::new(req.k_factor)?;
    book.insert(a.clone(), Rating(req.rating_a))?;
    book.insert(b.clone(), Rating(req.rating_b))?;
    let (expected_a, expected_b) = expected_score(Rating(req.rating_a), Rating(req.rating_b))?;
    let outcome = match req.result {
        MatchScore::AWins => Outcome::FirstWins,
        MatchScore::Draw => Outcome::Draw,
        MatchScore::BWins => Outcome::SecondWins,
    };
    let next = book.apply_match(&MatchResult::new(a.clone(), b.clone(), outcome)?)?;
    let value = |p: &PlayerId| next.get(p).map(Rating::value).unwrap_or_default();
    Ok(UpdateResponse { expected_a, expected_b, new_a: value(&a), new_b: value(&b) })
}

fn model(accuracy: Option<f64>) -> AnnotatorModel {
    accuracy.map_or(AnnotatorModel::Oracle, AnnotatorModel::FixedAccuracy)
}

fn check_players(n: usize) -> Result<(), DemoError> {
    if n > MAX_PLAYERS {
        return Err(DemoError::Limit(format!("at most {MAX_PLAYERS} players, got {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRequest {
    pub players: usize,
    pub rounds: usize,
    /// Annotator accuracy; omitted means every vote follows the latent order.
    pub accuracy: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardRow {
    pub segment_id: String,
    pub skill: f64,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayedMatch {
    pub left: String,
    pub right: String,
    /// `left`, `right` or `draw`.
    pub winner: String,
    pub votes_left: f64,
    pub votes_right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundView {
    pub round: usize,
    pub matches: Vec<PlayedMatch>,
    pub bye: Option<String>,
    pub rematches: usize,
    pub tau_vs_truth: f64,
    /// Best first.
    pub leaderboard: Vec<BoardRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rounds: Vec<RoundView>,
    pub comparisons: usize,
    pub votes: usize,
}

/// Plays one seeded Swiss tournament and returns every round's pairings and leaderboard.
pub fn swiss_trajectory(req: &TrajectoryRequest) -> Result<Trajectory, DemoError> {
    check_players(req.players)?;
    let config = SimConfig {
        n_players: req.players,
        rounds: req.rounds,
        model: model(req.accuracy),
        seeds: vec![req.seed],
        ..SimConfig::default()
    };
    config.validate()?;
    let (run, arena) = run_arena(&config, req.seed)?;
    let skills = LatentSkills::evenly_spaced(req.players, req.seed);
    let rounds = arena
        .completed_rounds()
        .iter()
        .zip(&run.tau_vs_truth)
        .map(|(r, &tau)| RoundView {
            round: r.round,
            matches: r
                .outcomes
                .iter()
                .map(|o| PlayedMatch {
                    left: o.left.to_string(),
                    right: o.right.to_string(),
                    winner: match o.outcome {
                        Outcome::FirstWins => "left",
                        Outcome::SecondWins => "right",
                        Outcome::Draw => "draw",
                    }
                    .into(),
                    votes_left: o.votes_left,
                    votes_right: o.votes_right,
                })
                .collect(),
            bye: r.pairing.bye.as_ref().map(ToString::to_string),
            rematches: r.pairing.rematch_count,
            tau_vs_truth: tau,
            leaderboard: board(&r.ranking, &skills),
        })
        .collect();
    Ok(Trajectory { rounds, comparisons: run.comparisons, votes: run.votes })
}

fn board(ranking: &Ranking, skills: &LatentSkills) -> Vec<BoardRow> {
    ranking
        .entries()
        .iter()
        .map(|(p, r)| BoardRow { segment_id: p.to_string(), skill: skills.get(p), rating: *r })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRequest {
    pub players: usize,
    pub rounds: usize,
    pub accuracy: Option<f64>,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub swiss_tau_vs_truth: Vec<SeriesPoint>,
    pub swiss_consecutive_tau: Vec<SeriesPoint>,
    pub round_robin_tau_vs_truth: Vec<SeriesPoint>,
    /// Comparisons in one tournament (the same for every seed).
    pub swiss_comparisons: usize,
    pub round_robin_comparisons: usize,
    pub mean_improvement: f64,
}

/// Mean tau curves over `seeds` seeds for Swiss and round-robin scheduling.
pub fn convergence(req: &ConvergenceRequest) -> Result<Convergence, DemoError> {
    check_players(req.players)?;
    if req.seeds > MAX_SEEDS {
        return Err(DemoError::Limit(format!("at most {MAX_SEEDS} seeds, got {}", req.seeds)));
    }
    let config = SimConfig {
        n_players: req.players,
        rounds: req.rounds,
        model: model(req.accuracy),
        seeds: (0..req.seeds as u64).collect(),
        ..SimConfig::default()
    };
    let paired = compare_swiss_vs_roundrobin(&config)?;
    Ok(Convergence {
        swiss_tau_vs_truth: paired.swiss.mean_tau_vs_truth.clone(),
        swiss_consecutive_tau: paired.swiss.mean_consecutive_tau.clone(),
        round_robin_tau_vs_truth: paired.round_robin.mean_tau_vs_truth.clone(),
        swiss_comparisons: paired.swiss_comparisons,
        round_robin_comparisons: paired.round_robin_comparisons,
        mean_improvement: paired.mean_improvement(),
    })
}

/// Decodes a request, runs `f`, encodes the response.
pub fn handle<Req, Resp>(request: &str, f: impl FnOnce(&Req) -> Result<Resp, DemoError>) -> Result<String, DemoError>
where
    Req: for<'de> Deserialize<'de>,
    Resp: Serialize,
{
    let req: Req = serde_json::from_str(request)?;
    Ok(serde_json::to_string(&f(&req)?)?)
}

fn js<T>(r: Result<T, DemoError>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = ratingUpdate)]
pub fn rating_update_json(request: &str) -> Result<String, JsError> {
    js(handle(request, rating_update))
}

#[wasm_bindgen(js_name = swissTrajectory)]
pub fn swiss_trajectory_json(request: &str) -> Result<String, JsError> {
    js(handle(request, swiss_trajectory))
}

#[wasm_bindgen(js_name = convergence)]
pub fn convergence_json(request: &str) -> Result<String, JsError> {
    js(handle(request, convergence))
}
