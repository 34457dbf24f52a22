//! Ranking quality and convergence statistics.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::AggregatedOutcome;
use crate::ratings::{PlayerId, RatingBook};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("rankings cover different players")]
    PlayerSetMismatch,
    #[error("player `{0}` appears twice in a ranking")]
    DuplicatePlayer(PlayerId),
    #[error("kendall tau is undefined when a ranking has every score tied")]
    Degenerate,
    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("score of `{0}` is not finite")]
    NonFinite(PlayerId),
}

/// Players with scores, best first. Equal scores are ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    entries: Vec<(PlayerId, f64)>,
}

impl Ranking {
    /// Sorts by score descending, then player id.
    pub fn new(entries: Vec<(PlayerId, f64)>) -> Result<Self, AnalysisError> {
        let mut seen = std::collections::HashSet::new();
        for (p, s) in &entries {
            if !seen.insert(p) {
                return Err(AnalysisError::DuplicatePlayer(p.clone()));
            }
            if !s.is_finite() {
                return Err(AnalysisError::NonFinite(p.clone()));
            }
        }
        let mut entries = entries;
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Self { entries })
    }

    pub fn from_book(book: &RatingBook) -> Self {
        Self::new(book.iter().map(|(p, r)| (p.clone(), r.0)).collect()).expect("book ratings are finite and unique")
    }

    pub fn entries(&self) -> &[(PlayerId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score(&self, p: &PlayerId) -> Option<f64> {
        self.entries.iter().find(|(q, _)| q == p).map(|(_, s)| *s)
    }

    /// Scores aligned to `other`'s player order; errors if the player sets differ.
    fn aligned_with<'a>(&'a self, other: &'a Ranking) -> Result<Vec<(f64, f64)>, AnalysisError> {
        if self.len() != other.len() {
            return Err(AnalysisError::PlayerSetMismatch);
        }
        let mine: HashMap<&PlayerId, f64> = self.entries.iter().map(|(p, s)| (p, *s)).collect();
        other
            .entries
            .iter()
            .map(|(p, s)| mine.get(p).map(|m| (*m, *s)).ok_or(AnalysisError::PlayerSetMismatch))
            .collect()
    }
}

/// Kendall's tau-b between the scores of two rankings over the same players.
///
/// Uses Knight's O(n log n) method: sort by the first score, count ties, then
/// count discordant pairs as the swaps of a stable merge sort on the second.
pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<f64, AnalysisError> {
    let mut pairs = a.aligned_with(b)?;
    let n = pairs.len() as u64;
    if n < 2 {
        return Err(AnalysisError::TooFew { needed: 2, got: n as usize });
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let n0 = n * (n - 1) / 2;
    let ties_a = tied_pairs(pairs.iter().map(|p| p.0));
    let ties_joint = tied_pairs_joint(&pairs);

    let mut second: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = second.clone();
    let swaps = merge_count(&mut second, &mut buf);
    let ties_b = tied_pairs(second.iter().copied());

    let denom_a = n0 - ties_a;
    let denom_b = n0 - ties_b;
    if denom_a == 0 || denom_b == 0 {
        return Err(AnalysisError::Degenerate);
    }
    let numerator = n0 as i64 - ties_a as i64 - ties_b as i64 + ties_joint as i64 - 2 * swaps as i64;
    let tau = numerator as f64 / ((denom_a as f64) * (denom_b as f64)).sqrt();
    Ok(tau.clamp(-1.0, 1.0))
}

/// Tied pairs within a sorted sequence.
fn tied_pairs(sorted: impl Iterator<Item = f64>) -> u64 {
    let mut total = 0;
    let mut run = 0u64;
    let mut prev: Option<f64> = None;
    for x in sorted {
        if prev == Some(x) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(x);
    }
    total + run * (run + 1) / 2
}

fn tied_pairs_joint(sorted: &[(f64, f64)]) -> u64 {
    let mut total = 0;
    let mut run = 0u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
    }
    total + run * (run + 1) / 2
}

/// Stable merge sort ascending; returns the number of inversions.
fn merge_count(xs: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left_buf, right_buf) = buf.split_at_mut(mid);
    let mut swaps = merge_count(&mut xs[..mid], left_buf) + merge_count(&mut xs[mid..], right_buf);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if xs[j] < xs[i] {
            buf[k] = xs[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = xs[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&xs[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&xs[j..n]);
    xs.copy_from_slice(&buf[..n]);
    swaps
}

/// Tau values indexed by round; indices strictly increase.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TauSeries {
    pub points: Vec<(usize, f64)>,
}

impl TauSeries {
    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.1)
    }
}

/// Entry `r` (1-based) holds the tau between the rankings after rounds `r` and `r + 1`.
pub fn consecutive_taus(rankings: &[Ranking]) -> Result<TauSeries, AnalysisError> {
    if rankings.len() < 2 {
        return Err(AnalysisError::TooFew { needed: 2, got: rankings.len() });
    }
    let points = rankings
        .windows(2)
        .enumerate()
        .map(|(i, w)| kendall_tau(&w[0], &w[1]).map(|t| (i + 1, t)))
        .collect::<Result<_, _>>()?;
    Ok(TauSeries { points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileTable {
    /// Rank order of the source ranking.
    pub rows: Vec<PercentileRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileRow {
    pub player: PlayerId,
    /// 1-based position in the ranking.
    pub rank: usize,
    pub score: f64,
    pub percentile: f64,
}

impl PercentileTable {
    pub fn get(&self, p: &PlayerId) -> Option<f64> {
        self.rows.iter().find(|r| &r.player == p).map(|r| r.percentile)
    }
}

/// Maps rank `r` of `n` to `100 (n - r) / (n - 1)`; tied scores share the mean
/// of the percentiles their positions span.
pub fn to_percentiles(ranking: &Ranking) -> Result<PercentileTable, AnalysisError> {
    let n = ranking.len();
    if n < 2 {
        return Err(AnalysisError::TooFew { needed: 2, got: n });
    }
    let at = |rank: usize| 100.0 * (n - rank) as f64 / (n - 1) as f64;
    let entries = ranking.entries();
    let mut rows = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && entries[end].1 == entries[start].1 {
            end += 1;
        }
        let shared = (start + 1..=end).map(at).sum::<f64>() / (end - start) as f64;
        for (i, (p, s)) in entries[start..end].iter().enumerate() {
            rows.push(PercentileRow { player: p.clone(), rank: start + i + 1, score: *s, percentile: shared });
        }
        start = end;
    }
    Ok(PercentileTable { rows })
}

/// Histogram over exact values, ascending.
pub type Histogram = Vec<(f64, usize)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub mean_agreement: f64,
    pub agreement_distribution: Histogram,
    pub vote_difference_distribution: Histogram,
    /// `1 + share of votes for the right-hand (second shown) video`; 1.5 is balanced.
    pub winner_balance: f64,
    pub total_comparisons: usize,
    pub escalated: usize,
}

fn histogram(values: impl Iterator<Item = f64>) -> Histogram {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for v in values {
        // Values are non-negative, so the bit pattern orders like the number.
        counts.entry(v.to_bits()).or_insert((v, 0)).1 += 1;
    }
    counts.into_values().collect()
}

pub fn agreement_stats(outcomes: &[AggregatedOutcome]) -> Result<AgreementStats, AnalysisError> {
    if outcomes.is_empty() {
        return Err(AnalysisError::TooFew { needed: 1, got: 0 });
    }
    let total = outcomes.len();
    let mean_agreement = outcomes.iter().map(|o| o.agreement_rate).sum::<f64>() / total as f64;
    let right: f64 = outcomes.iter().map(|o| o.votes_right).sum();
    let all: f64 = outcomes.iter().map(|o| o.votes_left + o.votes_right).sum();
    Ok(AgreementStats {
        mean_agreement,
        agreement_distribution: histogram(outcomes.iter().map(|o| o.agreement_rate)),
        vote_difference_distribution: histogram(outcomes.iter().map(|o| o.vote_difference)),
        winner_balance: 1.0 + right / all,
        total_comparisons: total,
        escalated: outcomes.iter().filter(|o| o.escalated).count(),
    })
}

/// Arithmetic mean, `None` when empty.
pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Linear-interpolated quantile of unsorted data, `q` in `[0, 1]`.
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}
