//! Annotation service state: arenas, leases and worker records.
//!
//! Every arena sits behind its own mutex, so leasing and vote intake are
//! atomic per arena while different arenas proceed in parallel. Lease expiry
//! is counted in requests handled by the arena (ticks), not wall-clock time.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use skillarena_core::aggregation::{
    qualify_worker, score_worker_on_golds, AggregationError, Choice, GoldAnswers, QualificationPolicy, Vote, WorkerId,
    WorkerRecord,
};
use skillarena_core::analysis::AgreementStats;
use skillarena_core::reports::VoteLogRecord;
use skillarena_core::seed;
use skillarena_core::tournament::catalog::{self, group_by_action};
use skillarena_core::tournament::{AdmitAll, Arena, PairState, SegmentRef, TournamentConfig, TournamentError};
use skillarena_core::{PlayerId, UnorderedPair};

use crate::error::ApiError;
use crate::store::{Store, StoreError};

pub const DEFAULT_LEASE_TICKS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceOptions {
    pub lease_ticks: u64,
    /// Skip the qualification gate (local testing and simulations).
    pub admit_all: bool,
    pub qualification: QualificationPolicy,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self { lease_ticks: DEFAULT_LEASE_TICKS, admit_all: false, qualification: QualificationPolicy::default() }
    }
}

/// A pair with a known better side, shown to workers to measure their accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldPair {
    pub arena_id: String,
    pub left: PlayerId,
    pub right: PlayerId,
    pub better: PlayerId,
    #[serde(default)]
    pub left_url: String,
    #[serde(default)]
    pub right_url: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WorkerBook {
    pub records: BTreeMap<WorkerId, WorkerRecord>,
    pub gold_votes: Vec<VoteLogRecord>,
}

impl WorkerBook {
    fn answered_gold(&self, worker: &WorkerId, arena_id: &str, gold: &GoldPair) -> bool {
        self.gold_votes.iter().any(|v| {
            &v.worker_id == worker && v.arena_id == arena_id && v.pair.0 == gold.left && v.pair.1 == gold.right
        })
    }

    fn is_qualified(&self, worker: &WorkerId) -> bool {
        self.records.get(worker).is_some_and(|r| r.qualified)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LeaseKind {
    Pair(String),
    Gold(usize),
}

#[derive(Debug, Clone)]
struct Lease {
    kind: LeaseKind,
    worker: WorkerId,
    expires_at: u64,
    ticket: Ticket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Media {
    pub media_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicketPair {
    pub left: Media,
    pub right: Media,
}

/// What an annotation client sees: media only, never segment ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ticket {
    pub ticket_id: String,
    pub arena_id: String,
    pub action_label: String,
    pub pair: TicketPair,
    pub worker_id: WorkerId,
    pub expires_at: u64,
    pub allow_no_difference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextPair {
    Assigned(Ticket),
    NoWork { arena_id: String, round: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub state: PairState,
    pub votes: usize,
    pub remaining: usize,
    pub worker_qualified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentAck {
    pub ticket_id: String,
    pub status: String,
    pub pair_state: PairState,
    pub votes: usize,
    pub remaining: usize,
    pub worker_qualified: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Judgment {
    pub ticket_id: String,
    pub choice: Choice,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct CreateArenas {
    /// Catalog text, CSV or JSON.
    pub catalog: Option<String>,
    pub segments: Option<Vec<SegmentRef>>,
    pub config: TournamentConfig,
    pub gold_pairs: Vec<GoldPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaSummary {
    pub arena_id: String,
    pub action_label: String,
    pub segments: usize,
    /// Latest round opened, 1-based; 0 before the first round.
    pub round: usize,
    pub round_open: bool,
    pub rounds_completed: usize,
    pub max_rounds: usize,
    pub finished: bool,
    pub open_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub segment_id: PlayerId,
    pub rating: f64,
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub arena_id: String,
    /// Ratings reflect this many closed rounds.
    pub rounds_completed: usize,
    pub entries: Vec<LeaderboardEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStatus {
    pub pair_id: String,
    pub state: PairState,
    pub votes: usize,
    pub remaining: usize,
    pub leased: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauPoint {
    pub round: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    #[serde(flatten)]
    pub summary: ArenaSummary,
    pub comparisons: usize,
    pub votes: usize,
    pub rematches: usize,
    pub pairs: Vec<PairStatus>,
    pub agreement: Option<AgreementStats>,
    pub consecutive_tau: Vec<TauPoint>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RegisterWorker {
    pub worker_id: WorkerId,
    pub approval_rate: f64,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{}: {source}", path.display())]
    Replay { path: PathBuf, source: TournamentError },
    #[error("{}: arena `{arena_id}` appears in more than one log", path.display())]
    DuplicateArena { path: PathBuf, arena_id: String },
}

struct ArenaSlot {
    arena: Arena,
    gold: Vec<GoldPair>,
    leases: HashMap<String, Lease>,
    acks: HashMap<String, Ack>,
    tick: u64,
}

impl ArenaSlot {
    fn new(arena: Arena, gold: Vec<GoldPair>) -> Self {
        Self { arena, gold, leases: HashMap::new(), acks: HashMap::new(), tick: 0 }
    }

    /// Advances the logical clock and drops leases that ran out.
    fn tick(&mut self) {
        self.tick += 1;
        let now = self.tick;
        self.leases.retain(|_, l| l.expires_at >= now);
    }

    fn leased(&self, pair_id: &str) -> usize {
        self.leases.values().filter(|l| l.kind == LeaseKind::Pair(pair_id.to_string())).count()
    }

    fn summary(&self) -> ArenaSummary {
        let a = &self.arena;
        ArenaSummary {
            arena_id: a.arena_id().to_string(),
            action_label: a.segments().first().map(|s| s.action_label.clone()).unwrap_or_default(),
            segments: a.segments().len(),
            round: current_round(a),
            round_open: a.is_round_open(),
            rounds_completed: a.round(),
            max_rounds: a.max_rounds(),
            finished: a.is_finished(),
            open_pairs: a.unresolved_count(),
        }
    }
}

pub struct Service {
    opts: ServiceOptions,
    store: Option<Store>,
    arenas: RwLock<BTreeMap<String, Arc<Mutex<ArenaSlot>>>>,
    workers: Mutex<WorkerBook>,
    tickets: Mutex<HashMap<String, String>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn storage(e: StoreError) -> ApiError {
    ApiError::internal(format!("storage: {e}"))
}

fn ticket_id(arena_id: &str, item: &str, worker: &WorkerId, tick: u64) -> String {
    let mut h = Sha256::new();
    for part in [arena_id, item, worker.as_str(), &tick.to_string()] {
        h.update(part.as_bytes());
        h.update([0x1f]);
    }
    hex::encode(h.finalize())[..32].to_string()
}

impl Service {
    /// A service that keeps everything in memory.
    pub fn in_memory(opts: ServiceOptions) -> Self {
        Self {
            opts,
            store: None,
            arenas: RwLock::new(BTreeMap::new()),
            workers: Mutex::new(WorkerBook::default()),
            tickets: Mutex::new(HashMap::new()),
        }
    }

    /// Replays every arena log found in the store.
    pub fn load(store: Store, opts: ServiceOptions) -> Result<Self, LoadError> {
        let mut arenas = BTreeMap::new();
        for (path, records) in store.load_logs()? {
            let arena = Arena::replay(records).map_err(|source| LoadError::Replay { path: path.clone(), source })?;
            let id = arena.arena_id().to_string();
            if arenas.contains_key(&id) {
                return Err(LoadError::DuplicateArena { path, arena_id: id });
            }
            let gold: Vec<GoldPair> = store.load_gold(&id)?;
            log::info!("loaded arena {id} at round {}", arena.round());
            arenas.insert(id, Arc::new(Mutex::new(ArenaSlot::new(arena, gold))));
        }
        let workers: WorkerBook = store.load_workers()?;
        Ok(Self {
            opts,
            store: Some(store),
            arenas: RwLock::new(arenas),
            workers: Mutex::new(workers),
            tickets: Mutex::new(HashMap::new()),
        })
    }

    pub fn options(&self) -> &ServiceOptions {
        &self.opts
    }

    fn slot(&self, arena_id: &str) -> Result<Arc<Mutex<ArenaSlot>>, ApiError> {
        self.arenas
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(arena_id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown_arena", format!("no arena `{arena_id}`")))
    }

    pub fn arena_ids(&self) -> Vec<String> {
        self.arenas.read().unwrap_or_else(|p| p.into_inner()).keys().cloned().collect()
    }

    /// Creates one arena per action label and opens its first round.
    pub fn create_arenas(&self, req: CreateArenas) -> Result<Vec<ArenaSummary>, ApiError> {
        let mut segments = req.segments.unwrap_or_default();
        if let Some(text) = &req.catalog {
            segments.extend(catalog::parse(text).map_err(|e| ApiError::bad_request("invalid_catalog", e.to_string()))?);
        }
        if segments.is_empty() {
            return Err(ApiError::bad_request("invalid_catalog", "no segments supplied"));
        }
        let groups = group_by_action(&segments);
        for g in &req.gold_pairs {
            if !groups.contains_key(&g.arena_id) {
                return Err(ApiError::bad_request("invalid_gold", format!("gold pair for unknown arena `{}`", g.arena_id)));
            }
            if g.left == g.right || (g.better != g.left && g.better != g.right) {
                return Err(ApiError::bad_request(
                    "invalid_gold",
                    format!("gold pair ({}, {}) must name one of its sides as better", g.left, g.right),
                ));
            }
        }

        let mut map = self.arenas.write().unwrap_or_else(|p| p.into_inner());
        if let Some(id) = groups.keys().find(|id| map.contains_key(*id)) {
            return Err(ApiError::conflict("arena_exists", format!("arena `{id}` already exists")));
        }
        let mut built = Vec::new();
        for (action, segs) in groups {
            let mut arena = Arena::init(action.clone(), segs, req.config.clone())?;
            arena.open_round()?;
            let gold: Vec<GoldPair> = req.gold_pairs.iter().filter(|g| g.arena_id == action).cloned().collect();
            built.push((action, arena, gold));
        }
        if let Some(store) = &self.store {
            for (id, arena, gold) in &built {
                store.create_log(id, arena.events()).map_err(storage)?;
                store.save_gold(id, gold).map_err(storage)?;
            }
        }
        let mut out = Vec::new();
        for (id, arena, gold) in built {
            let slot = ArenaSlot::new(arena, gold);
            out.push(slot.summary());
            map.insert(id, Arc::new(Mutex::new(slot)));
        }
        Ok(out)
    }

    pub fn list(&self) -> Vec<ArenaSummary> {
        let slots: Vec<_> = self.arenas.read().unwrap_or_else(|p| p.into_inner()).values().cloned().collect();
        slots.iter().map(|s| lock(s).summary()).collect()
    }

    /// Leases work to a worker.
    ///
    /// A worker holding an unexpired ticket in this arena gets that ticket again.
    /// Otherwise pairs are offered fewest recorded votes first, then by pair id,
    /// and only while the pair's live leases stay below its remaining vote slots.
    pub fn next_pair(&self, arena_id: &str, worker: &WorkerId, qualification: bool) -> Result<NextPair, ApiError> {
        let slot = self.slot(arena_id)?;
        let mut slot = lock(&slot);
        slot.tick();
        if let Some(lease) = slot.leases.values().find(|l| &l.worker == worker) {
            return Ok(NextPair::Assigned(lease.ticket.clone()));
        }
        let no_work = NextPair::NoWork { arena_id: arena_id.to_string(), round: current_round(&slot.arena) };

        let workers = lock(&self.workers);
        let unseen_gold: Vec<usize> =
            (0..slot.gold.len()).filter(|&i| !workers.answered_gold(worker, arena_id, &slot.gold[i])).collect();
        if qualification {
            if !workers.records.contains_key(worker) {
                return Err(ApiError::not_found("unknown_worker", format!("worker `{worker}` is not registered")));
            }
            drop(workers);
            return Ok(match unseen_gold.first() {
                Some(&i) => NextPair::Assigned(self.lease_gold(&mut slot, i, worker)),
                None => no_work,
            });
        }
        if !self.opts.admit_all && !workers.is_qualified(worker) {
            return Err(TournamentError::UnqualifiedWorker(worker.clone()).into());
        }
        drop(workers);

        let config = slot.arena.config();
        if config.gold_rate > 0.0 && !unseen_gold.is_empty() {
            let mut rng = seed::rng(
                config.presentation_seed,
                &[seed::hash_str(arena_id), slot.tick, seed::hash_str(worker.as_str())],
            );
            if rng.gen_bool(config.gold_rate) {
                let pick = unseen_gold[rng.gen_range(0..unseen_gold.len())];
                return Ok(NextPair::Assigned(self.lease_gold(&mut slot, pick, worker)));
            }
        }

        let policy = slot.arena.policy();
        let candidate = slot
            .arena
            .pending()
            .iter()
            .filter(|p| p.state != PairState::Resolved && !p.has_voted(worker))
            .filter(|p| slot.leased(&p.pair_id) < p.remaining_votes(&policy))
            .min_by(|a, b| (a.votes.len(), &a.pair_id).cmp(&(b.votes.len(), &b.pair_id)))
            .map(|p| p.pair_id.clone());
        let Some(pair_id) = candidate else {
            return Ok(no_work);
        };
        let pair = slot.arena.pending_pair(&pair_id).expect("candidate is pending");
        let url = |p: &PlayerId| slot.arena.segment(p).map(|s| s.media_url.clone()).unwrap_or_default();
        let (left_url, right_url) = (url(&pair.left), url(&pair.right));
        Ok(NextPair::Assigned(self.issue(&mut slot, LeaseKind::Pair(pair_id), worker, left_url, right_url)))
    }

    fn lease_gold(&self, slot: &mut ArenaSlot, idx: usize, worker: &WorkerId) -> Ticket {
        let g = &slot.gold[idx];
        let (l, r) = (g.left_url.clone(), g.right_url.clone());
        self.issue(slot, LeaseKind::Gold(idx), worker, l, r)
    }

    fn issue(&self, slot: &mut ArenaSlot, kind: LeaseKind, worker: &WorkerId, left: String, right: String) -> Ticket {
        let arena_id = slot.arena.arena_id().to_string();
        let item = match &kind {
            LeaseKind::Pair(id) => id.clone(),
            LeaseKind::Gold(i) => format!("gold-{i}"),
        };
        let id = ticket_id(&arena_id, &item, worker, slot.tick);
        let expires_at = slot.tick + self.opts.lease_ticks;
        let ticket = Ticket {
            ticket_id: id.clone(),
            action_label: slot.summary().action_label,
            arena_id: arena_id.clone(),
            pair: TicketPair { left: Media { media_url: left }, right: Media { media_url: right } },
            worker_id: worker.clone(),
            expires_at,
            allow_no_difference: slot.arena.config().allow_no_difference,
        };
        slot.leases.insert(id.clone(), Lease { kind, worker: worker.clone(), expires_at, ticket: ticket.clone() });
        lock(&self.tickets).insert(id, arena_id);
        ticket
    }

    /// Records a judgment. Resubmitting a completed ticket returns the original ack.
    pub fn submit(&self, judgment: Judgment) -> Result<JudgmentAck, ApiError> {
        let arena_id = lock(&self.tickets)
            .get(&judgment.ticket_id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown_ticket", format!("no ticket `{}`", judgment.ticket_id)))?;
        let slot = self.slot(&arena_id)?;
        let mut slot = lock(&slot);
        let ack_of = |id: &str, a: Ack| JudgmentAck {
            ticket_id: id.to_string(),
            status: "accepted".into(),
            pair_state: a.state,
            votes: a.votes,
            remaining: a.remaining,
            worker_qualified: a.worker_qualified,
        };
        if let Some(a) = slot.acks.get(&judgment.ticket_id) {
            return Ok(ack_of(&judgment.ticket_id, *a));
        }
        slot.tick();
        let Some(lease) = slot.leases.get(&judgment.ticket_id).cloned() else {
            return Err(ApiError::new(
                axum::http::StatusCode::GONE,
                "ticket_expired",
                format!("ticket `{}` expired; request a new pair", judgment.ticket_id),
            ));
        };
        if judgment.choice == Choice::NoDifference && !slot.arena.config().allow_no_difference {
            return Err(AggregationError::NoDifferenceDisabled.into());
        }
        let ack = match &lease.kind {
            LeaseKind::Pair(pair_id) => self.submit_pair(&mut slot, pair_id, &lease.worker, judgment.choice)?,
            LeaseKind::Gold(idx) => {
                let gold = slot.gold[*idx].clone();
                self.submit_gold(&arena_id, &gold, &lease.worker, judgment.choice)?
            }
        };
        slot.leases.remove(&judgment.ticket_id);
        slot.acks.insert(judgment.ticket_id.clone(), ack);
        Ok(ack_of(&judgment.ticket_id, ack))
    }

    fn submit_pair(&self, slot: &mut ArenaSlot, pair_id: &str, worker: &WorkerId, choice: Choice) -> Result<Ack, ApiError> {
        let before = slot.arena.events().len();
        let status = slot.arena.submit_vote(pair_id, worker.clone(), choice, &AdmitAll)?;
        if let Some(store) = &self.store {
            if let Err(e) = store.append_log(slot.arena.arena_id(), &slot.arena.events()[before..]) {
                slot.arena = Arena::replay(slot.arena.events()[..before].to_vec()).expect("prefix of a valid log replays");
                return Err(storage(e));
            }
        }
        let qualified = self.opts.admit_all || lock(&self.workers).is_qualified(worker);
        Ok(Ack { state: status.state, votes: status.votes, remaining: status.remaining, worker_qualified: qualified })
    }

    fn submit_gold(&self, arena_id: &str, gold: &GoldPair, worker: &WorkerId, choice: Choice) -> Result<Ack, ApiError> {
        let vote = Vote {
            worker: worker.clone(),
            left: gold.left.clone(),
            right: gold.right.clone(),
            choice,
            is_gold: true,
            seq: 0,
        };
        let key = UnorderedPair::new(gold.left.clone(), gold.right.clone())
            .map_err(|e| ApiError::internal(format!("gold pair: {e}")))?;
        let answers: GoldAnswers = [(key, gold.better.clone())].into_iter().collect();
        let delta = score_worker_on_golds(std::slice::from_ref(&vote), &answers)?;

        let mut workers = lock(&self.workers);
        let mut record = workers
            .records
            .get(worker)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown_worker", format!("worker `{worker}` is not registered")))?;
        record.apply_gold(delta);
        if let Ok(q) = qualify_worker(&record, &self.opts.qualification) {
            record = q;
        }
        let qualified = record.qualified;
        let mut next = workers.clone();
        next.records.insert(worker.clone(), record);
        let sequence = next.gold_votes.len() as u64;
        next.gold_votes.push(VoteLogRecord {
            worker_id: worker.clone(),
            arena_id: arena_id.to_string(),
            pair: (gold.left.clone(), gold.right.clone()),
            choice,
            is_gold: true,
            sequence,
        });
        if let Some(store) = &self.store {
            store.save_workers(&next).map_err(storage)?;
        }
        *workers = next;
        Ok(Ack { state: PairState::Resolved, votes: 1, remaining: 0, worker_qualified: qualified || self.opts.admit_all })
    }

    /// Closes the current round and opens the next one, unless the arena is finished.
    pub fn advance(&self, arena_id: &str) -> Result<ArenaSummary, ApiError> {
        let slot = self.slot(arena_id)?;
        let mut slot = lock(&slot);
        let before = slot.arena.events().len();
        let mut next = slot.arena.clone();
        if next.is_round_open() {
            next.close_round()?;
        }
        if !next.is_finished() {
            next.open_round()?;
        } else if next.events().len() == before {
            return Err(TournamentError::MaxRoundsReached(next.max_rounds()).into());
        }
        if let Some(store) = &self.store {
            store.append_log(arena_id, &next.events()[before..]).map_err(storage)?;
        }
        slot.arena = next;
        slot.leases.clear();
        Ok(slot.summary())
    }

    pub fn leaderboard(&self, arena_id: &str) -> Result<Leaderboard, ApiError> {
        let slot = self.slot(arena_id)?;
        let slot = lock(&slot);
        Ok(leaderboard_of(&slot.arena))
    }

    pub fn stats(&self, arena_id: &str) -> Result<Stats, ApiError> {
        let slot = self.slot(arena_id)?;
        let slot = lock(&slot);
        let a = &slot.arena;
        let policy = a.policy();
        let pairs = a
            .pending()
            .iter()
            .map(|p| PairStatus {
                pair_id: p.pair_id.clone(),
                state: p.state,
                votes: p.votes.len(),
                remaining: p.remaining_votes(&policy),
                leased: slot.leased(&p.pair_id),
            })
            .collect();
        let consecutive_tau = a
            .consecutive_taus()
            .map(|s| s.points.into_iter().map(|(round, tau)| TauPoint { round, tau }).collect())
            .unwrap_or_default();
        Ok(Stats {
            summary: slot.summary(),
            comparisons: a.comparison_count(),
            votes: a.vote_count(),
            rematches: a.total_rematches(),
            pairs,
            agreement: a.agreement_stats(),
            consecutive_tau,
        })
    }

    /// Creates or updates a worker's approval rate and re-evaluates qualification.
    pub fn register_worker(&self, req: RegisterWorker) -> Result<WorkerRecord, ApiError> {
        if !(0.0..=1.0).contains(&req.approval_rate) {
            return Err(AggregationError::InvalidRate(req.approval_rate).into());
        }
        let mut workers = lock(&self.workers);
        let mut record = workers
            .records
            .get(&req.worker_id)
            .cloned()
            .unwrap_or_else(|| WorkerRecord::new(req.worker_id.clone(), req.approval_rate));
        record.approval_rate = req.approval_rate;
        if let Ok(q) = qualify_worker(&record, &self.opts.qualification) {
            record = q;
        }
        let mut next = workers.clone();
        next.records.insert(req.worker_id, record.clone());
        if let Some(store) = &self.store {
            store.save_workers(&next).map_err(storage)?;
        }
        *workers = next;
        Ok(record)
    }

    pub fn worker(&self, worker: &WorkerId) -> Result<WorkerRecord, ApiError> {
        lock(&self.workers)
            .records
            .get(worker)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown_worker", format!("worker `{worker}` is not registered")))
    }

    pub fn client_config(&self) -> serde_json::Value {
        let slots: Vec<_> = self.arenas.read().unwrap_or_else(|p| p.into_inner()).values().cloned().collect();
        let arenas: serde_json::Map<String, serde_json::Value> = slots
            .iter()
            .map(|s| {
                let s = lock(s);
                let c = s.arena.config();
                (
                    s.arena.arena_id().to_string(),
                    json!({
                        "allow_no_difference": c.allow_no_difference,
                        "gold_rate": c.gold_rate,
                        "gold_pairs": s.gold.len(),
                        "round": current_round(&s.arena),
                        "max_rounds": s.arena.max_rounds(),
                    }),
                )
            })
            .collect();
        json!({
            "lease_ticks": self.opts.lease_ticks,
            "admit_all": self.opts.admit_all,
            "qualification": self.opts.qualification,
            "arenas": arenas,
        })
    }
}

fn current_round(a: &Arena) -> usize {
    a.round() + usize::from(a.is_round_open())
}

pub fn leaderboard_of(arena: &Arena) -> Leaderboard {
    let entries = arena
        .export_percentiles()
        .rows
        .into_iter()
        .map(|r| LeaderboardEntry { rank: r.rank, segment_id: r.player, rating: r.score, percentile: r.percentile })
        .collect();
    Leaderboard { arena_id: arena.arena_id().to_string(), rounds_completed: arena.round(), entries }
}
