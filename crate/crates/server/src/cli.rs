//! The `skillarena` command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid configuration or input,
//! 3 infeasible split request, 4 event log replay mismatch.

use std::fs;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use skillarena_core::analysis::mean;
use skillarena_core::reports;
use skillarena_core::simulation::{compare_swiss_vs_roundrobin, run_tournament_sim, AnnotatorModel, SimConfig, SimError};
use skillarena_core::tournament::catalog;
use skillarena_core::tournament::{export_splits, Arena, Schedule, SplitCounts, SplitError, SplitSpec, TournamentConfig};

use crate::error::ApiError;
use crate::service::{CreateArenas, GoldPair, LoadError, Service, ServiceOptions, DEFAULT_LEASE_TICKS};
use crate::store::{file_stem, Store, StoreError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Replay(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Replay { .. } => CliError::Replay(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        use axum::http::StatusCode;
        if matches!(e.status, StatusCode::BAD_REQUEST | StatusCode::UNPROCESSABLE_ENTITY) {
            CliError::Config(e.to_string())
        } else {
            CliError::Other(e.to_string())
        }
    }
}

impl From<SplitError> for CliError {
    fn from(e: SplitError) -> Self {
        match e {
            SplitError::Infeasible { .. } | SplitError::SearchExhausted { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "skillarena", version, about = "Pairwise skill tournaments: annotation service and tools")]
pub struct Cli {
    /// Directory holding arena logs, gold pairs and worker records.
    #[arg(long, global = true, env = "SKILLARENA_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a catalog and create one arena per action.
    Init(InitArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Close the current round and open the next.
    Advance(AdvanceArgs),
    /// Write leaderboards, percentiles, tau series, agreement statistics and vote logs.
    Report(ReportArgs),
    /// Run synthetic tournaments.
    Simulate(SimulateArgs),
    /// Assign segments to train/val/test without splitting a video.
    ExportSplits(SplitArgs),
    /// Rebuild every arena from its log and check it is consistent.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Swiss,
    RoundRobin,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Swiss => Schedule::Swiss,
            ScheduleArg::RoundRobin => Schedule::RoundRobin,
        }
    }
}

/// Tournament settings. Flags override values from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with a full or partial tournament configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub k_factor: Option<f64>,
    #[arg(long)]
    pub votes_initial: Option<usize>,
    #[arg(long)]
    pub votes_escalation: Option<usize>,
    #[arg(long)]
    pub escalation_threshold: Option<f64>,
    #[arg(long)]
    pub presentation_seed: Option<u64>,
    #[arg(long)]
    pub gold_rate: Option<f64>,
    #[arg(long)]
    pub allow_no_difference: bool,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    #[arg(long)]
    pub first_round_shuffle_seed: Option<u64>,
    /// Disable the rematch-avoiding lookahead in Swiss pairing.
    #[arg(long)]
    pub no_lookahead: bool,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<TournamentConfig, CliError> {
        let mut c: TournamentConfig = match &self.config {
            Some(p) => serde_json::from_str(&read(p)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => TournamentConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(rounds, k_factor, votes_initial, votes_escalation, escalation_threshold, presentation_seed, gold_rate);
        if let Some(s) = self.schedule {
            c.schedule = s.into();
        }
        if self.first_round_shuffle_seed.is_some() {
            c.first_round_shuffle_seed = self.first_round_shuffle_seed;
        }
        c.allow_no_difference |= self.allow_no_difference;
        c.pairing_lookahead &= !self.no_lookahead;
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Catalog file (CSV with segment_id,video_id,action_label[,media_url], or JSON).
    #[arg(long)]
    pub catalog: PathBuf,
    /// JSON list of gold pairs `{arena_id,left,right,better,left_url,right_url}`.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "SKILLARENA_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Requests an arena handles before an unanswered ticket lapses.
    #[arg(long, default_value_t = DEFAULT_LEASE_TICKS)]
    pub lease_ticks: u64,
    /// Let every worker vote without qualification.
    #[arg(long)]
    pub admit_all: bool,
}

#[derive(Debug, Args)]
pub struct AdvanceArgs {
    /// Arena to advance; every arena when omitted.
    #[arg(long)]
    pub arena: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
    #[arg(long)]
    pub arena: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    Swiss,
    RoundRobin,
    /// Same seeds under both schedules.
    Compare,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 16)]
    pub players: usize,
    #[arg(long, default_value_t = 6)]
    pub rounds: usize,
    /// `oracle`, `fixed:P` or `logistic:T`.
    #[arg(long, default_value = "fixed:0.7", value_parser = parse_model)]
    pub model: AnnotatorModel,
    /// `A..B` (half open) or a comma-separated list.
    #[arg(long, default_value = "0..50", value_parser = parse_seeds)]
    pub seeds: SeedList,
    #[arg(long, value_enum, default_value = "swiss")]
    pub mode: SimMode,
    #[arg(long, default_value_t = 5)]
    pub votes_initial: usize,
    #[arg(long, default_value_t = 3)]
    pub votes_escalation: usize,
    #[arg(long, default_value_t = 0.8)]
    pub escalation_threshold: f64,
    #[arg(long, default_value_t = skillarena_core::ratings::DEFAULT_K_FACTOR)]
    pub k_factor: f64,
    /// Directory for per-round CSV rows and `summary.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    /// Train,val,test proportions applied per action.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["counts", "spec"])]
    pub ratio: Option<Vec<f64>>,
    /// Train,val,test clip counts applied to every action.
    #[arg(long, value_delimiter = ',', conflicts_with = "spec")]
    pub counts: Option<Vec<usize>>,
    /// JSON `{"per_action": {"<action>": {"train":..,"val":..,"test":..}}}`.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Log files to check; every log in the data directory when omitted.
    pub logs: Vec<PathBuf>,
}

pub fn parse_model(s: &str) -> Result<AnnotatorModel, String> {
    let model = match s.split_once(':') {
        None if s == "oracle" => AnnotatorModel::Oracle,
        Some(("fixed", p)) => AnnotatorModel::FixedAccuracy(p.parse().map_err(|e| format!("accuracy `{p}`: {e}"))?),
        Some(("logistic", t)) => AnnotatorModel::Logistic(t.parse().map_err(|e| format!("temperature `{t}`: {e}"))?),
        _ => return Err(format!("unknown model `{s}`; use oracle, fixed:P or logistic:T")),
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

pub fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let num = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("seed `{x}`: {e}"));
    let seeds: Vec<u64> = match s.split_once("..") {
        Some((a, b)) => (num(a)?..num(b)?).collect(),
        None => s.split(',').map(num).collect::<Result<_, _>>()?,
    };
    if seeds.is_empty() {
        return Err("seed list is empty".into());
    }
    Ok(SeedList(seeds))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?))
}

fn print_json(v: &serde_json::Value) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| CliError::Other(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let data = cli.data_dir;
    match cli.command {
        Command::Init(a) => init(&data, a),
        Command::Serve(a) => serve(&data, a),
        Command::Advance(a) => advance(&data, a),
        Command::Report(a) => report(&data, a),
        Command::Simulate(a) => simulate(a),
        Command::ExportSplits(a) => splits(a),
        Command::Replay(a) => replay(&data, a),
    }
}

fn init(data: &Path, a: InitArgs) -> Result<(), CliError> {
    let config = a.config.resolve()?;
    let text = read(&a.catalog)?;
    let segments = catalog::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", a.catalog.display())))?;
    let gold_pairs: Vec<GoldPair> = match &a.gold {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => Vec::new(),
    };
    let service = Service::load(Store::open(data)?, ServiceOptions::default())?;
    let created = service.create_arenas(CreateArenas { catalog: None, segments: Some(segments), config, gold_pairs })?;
    print_json(&json!({ "arenas": created }))
}

fn serve(data: &Path, a: ServeArgs) -> Result<(), CliError> {
    let opts = ServiceOptions { lease_ticks: a.lease_ticks, admit_all: a.admit_all, ..Default::default() };
    let service = Arc::new(Service::load(Store::open(data)?, opts)?);
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError::Config(format!("address {}:{}: {e}", a.host, a.port)))?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, crate::routes::router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}

fn advance(data: &Path, a: AdvanceArgs) -> Result<(), CliError> {
    let service = Service::load(Store::open(data)?, ServiceOptions::default())?;
    let ids = match a.arena {
        Some(id) => vec![id],
        None => service.arena_ids(),
    };
    let mut out = Vec::new();
    for id in ids {
        out.push(service.advance(&id)?);
    }
    print_json(&json!({ "arenas": out }))
}

fn report(data: &Path, a: ReportArgs) -> Result<(), CliError> {
    let store = Store::open(data)?;
    let mut arenas = Vec::new();
    for (path, records) in store.load_logs()? {
        let arena = Arena::replay(records).map_err(|e| CliError::Replay(format!("{}: {e}", path.display())))?;
        if a.arena.as_deref().is_none_or(|id| id == arena.arena_id()) {
            arenas.push(arena);
        }
    }
    if let Some(id) = &a.arena {
        if arenas.is_empty() {
            return Err(CliError::Config(format!("no arena `{id}`")));
        }
    }
    fs::create_dir_all(&a.out)?;
    let mut summary = serde_json::Map::new();
    let mut finals = Vec::new();
    let mut stats = Vec::new();
    for arena in &arenas {
        let id = arena.arena_id();
        let dir = a.out.join(file_stem(id));
        fs::create_dir_all(&dir)?;
        let ranking = arena.export_leaderboard();
        reports::write_leaderboard(create(&dir.join("leaderboard.csv"))?, id, &ranking)?;
        reports::write_percentiles(create(&dir.join("percentiles.csv"))?, id, &arena.export_percentiles())?;
        let taus = arena.consecutive_taus().unwrap_or_default();
        reports::write_tau_series(create(&dir.join("tau_series.csv"))?, id, &taus)?;
        let mut votes = create(&dir.join("votes.jsonl"))?;
        reports::write_vote_log(&mut votes, &reports::vote_log(arena.events()))?;
        votes.flush()?;
        if let Some(last) = taus.last() {
            finals.push(last);
        }
        if let Some(s) = arena.agreement_stats() {
            stats.push((id.to_string(), s));
        }
        summary.insert(
            id.to_string(),
            json!({
                "rounds_completed": arena.round(),
                "finished": arena.is_finished(),
                "comparisons": arena.comparison_count(),
                "votes": arena.vote_count(),
                "rematches": arena.total_rematches(),
                "final_consecutive_tau": taus.last(),
            }),
        );
    }
    let rows: Vec<(&str, &_)> = stats.iter().map(|(id, s)| (id.as_str(), s)).collect();
    reports::write_agreement_summary(create(&a.out.join("agreement_summary.csv"))?, &rows)?;
    reports::write_agreement_distribution(create(&a.out.join("agreement_distribution.csv"))?, &rows)?;
    let workers: crate::service::WorkerBook = store.load_workers()?;
    let mut gold = create(&a.out.join("gold_votes.jsonl"))?;
    reports::write_vote_log(&mut gold, &workers.gold_votes)?;
    gold.flush()?;
    print_json(&json!({
        "arenas": summary,
        "mean_final_consecutive_tau": mean(&finals),
        "out": a.out,
    }))
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let config = SimConfig {
        n_players: a.players,
        rounds: a.rounds,
        votes_initial: a.votes_initial,
        votes_escalation: a.votes_escalation,
        escalation_threshold: a.escalation_threshold,
        k_factor: a.k_factor,
        model: a.model,
        seeds: a.seeds.0,
        mode: match a.mode {
            SimMode::RoundRobin => Schedule::RoundRobin,
            _ => Schedule::Swiss,
        },
    };
    config.validate()?;
    let (summary, reports) = match a.mode {
        SimMode::Compare => {
            let paired = compare_swiss_vs_roundrobin(&config)?;
            (paired.summary_json(), vec![("swiss", paired.swiss), ("round_robin", paired.round_robin)])
        }
        mode => {
            let report = run_tournament_sim(&config)?;
            let name = if mode == SimMode::Swiss { "swiss" } else { "round_robin" };
            (report.summary_json(), vec![(name, report)])
        }
    };
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        for (name, report) in &reports {
            report.write_csv(create(&out.join(format!("rounds_{name}.csv")))?)?;
        }
        let mut w = create(&out.join("summary.json"))?;
        serde_json::to_writer_pretty(&mut w, &summary).map_err(|e| CliError::Other(e.to_string()))?;
        w.flush()?;
    }
    print_json(&summary)
}

fn splits(a: SplitArgs) -> Result<(), CliError> {
    let text = read(&a.catalog)?;
    let segments = catalog::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", a.catalog.display())))?;
    let spec = if let Some(p) = &a.spec {
        serde_json::from_str(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
    } else if let Some(c) = &a.counts {
        if c.len() != 3 {
            return Err(CliError::Config(format!("--counts needs train,val,test, got {c:?}")));
        }
        SplitSpec::uniform(&segments, SplitCounts { train: c[0], val: c[1], test: c[2] })
    } else {
        let r = a.ratio.as_deref().unwrap_or(&SplitSpec::DEFAULT_RATIO);
        if r.len() != 3 || r.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || r.iter().sum::<f64>() <= 0.0 {
            return Err(CliError::Config(format!("invalid ratio {r:?}")));
        }
        SplitSpec::from_ratio(&segments, [r[0], r[1], r[2]])
    };
    let assignment = export_splits(&segments, &spec, a.seed)?;
    match &a.out {
        Some(p) => reports::write_splits(create(p)?, &segments, &assignment)?,
        None => reports::write_splits(std::io::stdout().lock(), &segments, &assignment)?,
    }
    Ok(())
}

fn replay(data: &Path, a: ReplayArgs) -> Result<(), CliError> {
    let logs = if a.logs.is_empty() {
        Store::open(data)?.load_logs()?
    } else {
        a.logs.iter().map(|p| Store::read_log_file(p).map(|r| (p.clone(), r))).collect::<Result<_, _>>()?
    };
    let mut checked = Vec::new();
    for (path, records) in logs {
        let arena = Arena::replay(records.clone()).map_err(|e| CliError::Replay(format!("{}: {e}", path.display())))?;
        let again = Arena::replay(arena.events().to_vec())
            .map_err(|e| CliError::Replay(format!("{}: {e}", path.display())))?;
        if again.export_leaderboard() != arena.export_leaderboard() || arena.events() != records.as_slice() {
            return Err(CliError::Replay(format!("{}: replay is not deterministic", path.display())));
        }
        checked.push(json!({
            "arena_id": arena.arena_id(),
            "log": path,
            "events": records.len(),
            "rounds_completed": arena.round(),
        }));
    }
    print_json(&json!({ "status": "ok", "arenas": checked }))
}
