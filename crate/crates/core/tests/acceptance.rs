//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the test harness so the lines always reach stdout:
//! `cargo test -p skillarena-core --release --test acceptance`.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skillarena_core::aggregation::{aggregate_votes, needs_escalation, AggregationPolicy, Choice, Vote, WorkerId};
use skillarena_core::analysis::{kendall_tau, Ranking};
use skillarena_core::pairing::{coverage_fraction, min_recommended_rounds};
use skillarena_core::ratings::{expected_score, MatchResult, Outcome, PlayerId, Rating, RatingBook};
use skillarena_core::simulation::{
    compare_swiss_vs_roundrobin, run_arena, run_tournament_sim, AnnotatorModel, SimConfig,
};
use skillarena_core::tournament::events::{read_log, write_log};
use skillarena_core::tournament::{export_splits, Arena, SegmentRef, Split, SplitCounts, SplitError, SplitSpec, TournamentConfig};

/// Criteria that this implementation does not meet; the analysis lives in the README.
const KNOWN_RED: &[u32] = &[7, 9];

struct Verdict {
    id: u32,
    pass: bool,
    detail: String,
}

fn line(id: u32, pass: bool, detail: impl Into<String>) -> Verdict {
    let v = Verdict { id, pass, detail: detail.into() };
    println!("criterion {:>2}: {} - {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    v
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn pid(i: usize) -> PlayerId {
    PlayerId::from(format!("p{i:02}").as_str())
}

fn elo_algebra() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_norm = 0.0f64;
    for _ in 0..10_000 {
        let (a, b) = (rng.gen_range(-3000.0..3000.0), rng.gen_range(-3000.0..3000.0));
        let (ea, eb) = expected_score(Rating(a), Rating(b)).unwrap();
        worst_norm = worst_norm.max((ea + eb - 1.0).abs());
    }
    let mut worst_sum = 0.0f64;
    for _ in 0..1_000 {
        let n = 2 * rng.gen_range(1..=8);
        let mut book = RatingBook::new(32.0).unwrap();
        for i in 0..n {
            book.insert(pid(i), Rating(rng.gen_range(-1500.0..1500.0))).unwrap();
        }
        let results: Vec<_> = (0..n / 2)
            .map(|m| {
                let o = [Outcome::FirstWins, Outcome::SecondWins, Outcome::Draw][rng.gen_range(0..3)];
                MatchResult::new(pid(2 * m), pid(2 * m + 1), o).unwrap()
            })
            .collect();
        let after = book.apply_round(&results).unwrap();
        worst_sum = worst_sum.max((after.total() - book.total()).abs() / (n / 2) as f64);
    }
    let t = start.elapsed();
    line(
        1,
        worst_norm <= 1e-12 && worst_sum <= 1e-9 && t < Duration::from_secs(1),
        format!("max |E_A+E_B-1| = {worst_norm:.1e}, max sum drift per match = {worst_sum:.1e}, {}", secs(t)),
    )
}

fn oracle(seeds: std::ops::Range<u64>) -> SimConfig {
    SimConfig { model: AnnotatorModel::Oracle, seeds: seeds.collect(), ..SimConfig::default() }
}

fn coverage() -> Verdict {
    let r = run_tournament_sim(&oracle(0..5)).unwrap();
    let counts: HashSet<usize> = r.runs.iter().map(|x| x.comparisons).collect();
    let frac = coverage_fraction(16, 6).unwrap();
    line(
        2,
        counts == HashSet::from([48]) && frac == 0.4,
        format!("comparisons per tournament {counts:?}, coverage {frac}"),
    )
}

fn round_robin_delta() -> Verdict {
    let p = compare_swiss_vs_roundrobin(&oracle(0..3)).unwrap();
    let rr: HashSet<usize> = p.round_robin.runs.iter().map(|x| x.comparisons).collect();
    let pass = rr == HashSet::from([120]) && p.comparison_delta() == 72 && p.comparison_delta() * 10 == 120 * 6;
    line(
        3,
        pass,
        format!("round robin {rr:?}, delta {} = {:.3} of round robin", p.comparison_delta(), p.comparison_delta_fraction()),
    )
}

fn min_rounds() -> Verdict {
    let min = min_recommended_rounds(16).unwrap();
    let cfg = TournamentConfig::default();
    let warnings = cfg.warnings(16);
    line(
        4,
        min == 4 && cfg.rounds == 6 && warnings.is_empty(),
        format!("min_recommended_rounds(16) = {min}, default rounds {}, warnings {}", cfg.rounds, warnings.len()),
    )
}

fn no_rematch() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rematches = 0;
    for i in 0..200u64 {
        let n = rng.gen_range(8..=16);
        let rounds = rng.gen_range(1..=6);
        let model = AnnotatorModel::FixedAccuracy(rng.gen_range(0.5..=1.0));
        let c = SimConfig { n_players: n, rounds, model, seeds: vec![1000 + i], ..SimConfig::default() };
        let run = run_tournament_sim(&c).unwrap();
        rematches += run.runs[0].rematches;
    }
    let t = start.elapsed();
    line(5, rematches == 0 && t < Duration::from_secs(10), format!("{rematches} rematches over 200 tournaments, {}", secs(t)))
}

/// Independent tau-b: enumerate every pair and count with integers.
fn tau_b_oracle(x: &[i32], y: &[i32]) -> f64 {
    let (mut s, mut tx, mut ty, mut n0) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            n0 += 1;
            let dx = (x[i] - x[j]).signum() as i64;
            let dy = (y[i] - y[j]).signum() as i64;
            s += dx * dy;
            tx += (dx == 0) as i64;
            ty += (dy == 0) as i64;
        }
    }
    s as f64 / (((n0 - tx) * (n0 - ty)) as f64).sqrt()
}

fn tau_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut checked, mut worst, mut with_ties) = (0, 0.0f64, 0);
    while checked < 500 {
        let n = rng.gen_range(2..=10);
        let ties = checked % 2 == 0;
        let span = if ties { 3 } else { 1000 };
        let x: Vec<i32> = (0..n).map(|_| rng.gen_range(0..span)).collect();
        let y: Vec<i32> = (0..n).map(|_| rng.gen_range(0..span)).collect();
        if x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
            continue;
        }
        let ra = Ranking::new((0..n).map(|i| (pid(i), x[i] as f64)).collect()).unwrap();
        let rb = Ranking::new((0..n).map(|i| (pid(i), y[i] as f64)).collect()).unwrap();
        let got = kendall_tau(&ra, &rb).unwrap();
        worst = worst.max((got - tau_b_oracle(&x, &y)).abs());
        with_ties += ties as usize;
        checked += 1;
    }
    line(6, worst <= 1e-12, format!("500 pairs ({with_ties} drawn with ties), max deviation {worst:.1e}"))
}

fn oracle_recovery() -> Verdict {
    let start = Instant::now();
    let p = compare_swiss_vs_roundrobin(&oracle(0..50)).unwrap();
    let t = start.elapsed();
    // Threshold from the round-robin oracle run: it sees every pair, so its
    // median bounds what a full schedule recovers; the floor still applies.
    let rr_median = p.round_robin.final_tau_vs_truth.median;
    let threshold = 0.85f64.max(rr_median - 0.15);
    let median = p.swiss.final_tau_vs_truth.median;
    line(
        7,
        median >= threshold && t < Duration::from_secs(30),
        format!(
            "median Swiss-6 tau vs truth {median:.4} (IQR {:.4}..{:.4}), threshold {threshold:.4} (round robin median {rr_median:.4}), {}",
            p.swiss.final_tau_vs_truth.q1,
            p.swiss.final_tau_vs_truth.q3,
            secs(t)
        ),
    )
}

fn noisy_trend() -> Verdict {
    let c = SimConfig { model: AnnotatorModel::FixedAccuracy(0.7), ..SimConfig::default() };
    let r = run_tournament_sim(&c).unwrap();
    let mut csv = Vec::new();
    r.write_csv(&mut csv).unwrap();
    let csv_path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_noisy_trend.csv");
    std::fs::write(&csv_path, &csv).unwrap();
    let tail: Vec<_> = r.mean_consecutive_tau.iter().filter(|p| p.round >= 3).collect();
    let pooled = (tail.iter().map(|p| p.std_err.powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
    let trend = tail.windows(2).all(|w| w[1].mean >= w[0].mean - pooled);
    let last = r.mean_consecutive_tau.last().unwrap().mean;
    let series: Vec<String> = r.mean_consecutive_tau.iter().map(|p| format!("{}:{:.3}", p.round, p.mean)).collect();
    line(
        8,
        trend && (0.55..=0.95).contains(&last) && !csv.is_empty(),
        format!(
            "mean consecutive tau [{}], pooled SE {pooled:.4}, final {last:.3}, csv {} rows",
            series.join(" "),
            csv.iter().filter(|b| **b == b'\n').count() - 1
        ),
    )
}

fn dominance() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for model in [AnnotatorModel::Oracle, AnnotatorModel::FixedAccuracy(0.8)] {
        let p = compare_swiss_vs_roundrobin(&SimConfig { model, ..SimConfig::default() }).unwrap();
        let (dom, imp) = (p.dominance_fraction(), p.mean_improvement());
        pass &= dom >= 0.9 && imp <= 0.15;
        parts.push(format!("{model:?}: round robin >= Swiss in {:.0}% of seeds, mean improvement {imp:.3}", dom * 100.0));
    }
    line(9, pass, parts.join("; "))
}

fn vote(i: usize, c: Choice) -> Vote {
    Vote {
        worker: WorkerId::new(format!("w{i}")).unwrap(),
        left: pid(0),
        right: pid(1),
        choice: c,
        is_gold: false,
        seq: i as u64,
    }
}

fn truth_table() -> Verdict {
    let policy = AggregationPolicy::default();
    let mut mismatches = 0;
    let mut patterns = 0;
    let mut escalating_splits = 0;
    let mut draws = 0;
    for bits in 0u32..(1 << 5) {
        let votes: Vec<Vote> =
            (0..5).map(|i| vote(i, if bits >> i & 1 == 1 { Choice::Left } else { Choice::Right })).collect();
        let left = bits.count_ones();
        let expect_escalate = left == 2 || left == 3;
        let expect = if left > 2 { Outcome::FirstWins } else { Outcome::SecondWins };
        let got = aggregate_votes(&votes, &policy).unwrap();
        mismatches += (got.outcome != expect || needs_escalation(&votes, &policy).unwrap() != expect_escalate) as usize;
        escalating_splits += expect_escalate as usize;
        patterns += 1;
    }
    for bits in 0u32..(1 << 8) {
        let votes: Vec<Vote> =
            (0..8).map(|i| vote(i, if bits >> i & 1 == 1 { Choice::Left } else { Choice::Right })).collect();
        let left = bits.count_ones();
        let expect = match left.cmp(&4) {
            std::cmp::Ordering::Greater => Outcome::FirstWins,
            std::cmp::Ordering::Less => Outcome::SecondWins,
            std::cmp::Ordering::Equal => Outcome::Draw,
        };
        let got = aggregate_votes(&votes, &policy).unwrap();
        mismatches += (got.outcome != expect || !got.escalated) as usize;
        draws += (got.outcome == Outcome::Draw) as usize;
        patterns += 1;
    }
    line(
        10,
        mismatches == 0 && escalating_splits == 20 && draws == 70,
        format!("{patterns} patterns, {mismatches} mismatches, {escalating_splits} escalating 3-2 splits, {draws} 4-4 draws"),
    )
}

fn replay() -> Verdict {
    let c = SimConfig { seeds: vec![42], ..SimConfig::default() };
    let (_, live) = run_arena(&c, 42).unwrap();
    let mut log = Vec::new();
    write_log(&mut log, live.events()).unwrap();
    let replayed = Arena::replay(read_log(log.as_slice()).unwrap()).unwrap();
    let bits = |a: &Arena| -> Vec<(PlayerId, u64)> {
        a.export_leaderboard().entries().iter().map(|(p, s)| (p.clone(), s.to_bits())).collect()
    };
    let pct = |a: &Arena| serde_json::to_string(&a.export_percentiles()).unwrap();
    let same = bits(&live) == bits(&replayed) && pct(&live) == pct(&replayed);
    line(
        11,
        same && live.round() == 6,
        format!("{} events, {} rounds, leaderboard and percentiles identical: {same}", live.events().len(), live.round()),
    )
}

/// Ten actions with sixteen clips each, in forty videos of four different actions.
fn table_like_catalog() -> Vec<SegmentRef> {
    let mut videos = Vec::new();
    // (videos, stride) per split: windows of four consecutive actions cover
    // every action 10 / 2 / 4 times.
    for (count, stride) in [(25usize, 2usize), (5, 2), (10, 1)] {
        for j in 0..count {
            videos.push(((stride * j) % 10..(stride * j) % 10 + 4).map(|a| a % 10).collect::<Vec<_>>());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut order: Vec<usize> = (0..videos.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut out = Vec::new();
    for (v, &src) in order.iter().enumerate() {
        for &a in &videos[src] {
            out.push(SegmentRef {
                segment_id: PlayerId::from(format!("v{v:02}-a{a}").as_str()),
                video_id: format!("v{v:02}"),
                action_label: format!("action{a}"),
                media_url: String::new(),
            });
        }
    }
    out
}

fn split_soundness() -> Verdict {
    let catalog = table_like_catalog();
    let spec = SplitSpec::from_ratio(&catalog, SplitSpec::DEFAULT_RATIO);
    let assigned = export_splits(&catalog, &spec, 7);
    let (mut exact, mut disjoint, mut totals) = (false, false, [0usize; 3]);
    if let Ok(a) = &assigned {
        let mut per_action: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
        let mut per_video: BTreeMap<&str, HashSet<Split>> = BTreeMap::new();
        for s in &catalog {
            let split = a[&s.segment_id];
            let idx = Split::ALL.iter().position(|x| *x == split).unwrap();
            per_action.entry(&s.action_label).or_default()[idx] += 1;
            per_video.entry(&s.video_id).or_default().insert(split);
            totals[idx] += 1;
        }
        exact = per_action.len() == 10 && per_action.values().all(|c| *c == [10, 2, 4]);
        disjoint = per_video.values().all(|s| s.len() == 1);
    }
    // Validation needs 10 clips per split total, which four-clip videos cannot make.
    let bad = SplitSpec::uniform(&catalog, SplitCounts { train: 11, val: 1, test: 4 });
    let infeasible = matches!(export_splits(&catalog, &bad, 7), Err(SplitError::Infeasible { .. }));
    line(
        12,
        exact && disjoint && totals == [100, 20, 40] && infeasible,
        format!("totals {totals:?}, per-action exact {exact}, video-disjoint {disjoint}, infeasible spec rejected {infeasible}"),
    )
}

fn main() {
    let verdicts = [
        elo_algebra(),
        coverage(),
        round_robin_delta(),
        min_rounds(),
        no_rematch(),
        tau_oracle(),
        oracle_recovery(),
        noisy_trend(),
        dominance(),
        truth_table(),
        replay(),
        split_soundness(),
    ];
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    println!("failed criteria: {failed:?} (known red: {KNOWN_RED:?})");
    let unexpected: Vec<u32> = failed.iter().copied().filter(|id| !KNOWN_RED.contains(id)).collect();
    if !unexpected.is_empty() {
        eprintln!("criteria failed: {unexpected:?}");
        std::process::exit(1);
    }
}
