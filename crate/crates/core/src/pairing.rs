//! Swiss-system round generation.
//!
//! Players are sorted by current rating and paired top-down with the nearest
//! opponent they have not met yet, backtracking when a choice leaves the rest
//! of the field unpairable. When every rematch-free matching is exhausted the
//! round falls back to the matching with the fewest rematches, then the
//! smallest total rating gap. With an odd field the lowest-ranked player who
//! has sat out the fewest rounds gets the bye.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratings::{PlayerId, Rating, RatingBook};

/// Largest arena the pairing search supports.
pub const MAX_PLAYERS: usize = 128;

/// Above this size the min-rematch fallback is greedy instead of exhaustive.
const EXACT_FALLBACK_MAX: usize = 24;

/// Search budget (visited nodes) for the lookahead phase.
const LOOKAHEAD_BUDGET: usize = 200_000;

/// Once at most this many rematch-free rounds remain, the lookahead checks
/// that all of them can still be played rather than only the next one.
const DEEP_LOOKAHEAD_DEGREE: usize = 5;

/// Board pairs as indices into the standings.
type Matching = Vec<(usize, usize)>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PairingError {
    #[error("an arena needs at least 2 players, got {0}")]
    ArenaTooSmall(usize),
    #[error("pairing supports at most {MAX_PLAYERS} players, got {0}")]
    ArenaTooLarge(usize),
    #[error("player `{0}` listed twice in standings")]
    DuplicatePlayer(PlayerId),
    #[error("a pair needs two distinct players, got `{0}` twice")]
    SelfPair(PlayerId),
}

/// Two distinct players, stored in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(PlayerId, PlayerId)", into = "(PlayerId, PlayerId)")]
pub struct UnorderedPair {
    low: PlayerId,
    high: PlayerId,
}

impl UnorderedPair {
    pub fn new(a: PlayerId, b: PlayerId) -> Result<Self, PairingError> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { low: a, high: b }),
            std::cmp::Ordering::Greater => Ok(Self { low: b, high: a }),
            std::cmp::Ordering::Equal => Err(PairingError::SelfPair(a)),
        }
    }

    pub fn low(&self) -> &PlayerId {
        &self.low
    }

    pub fn high(&self) -> &PlayerId {
        &self.high
    }

    pub fn contains(&self, p: &PlayerId) -> bool {
        &self.low == p || &self.high == p
    }
}

impl TryFrom<(PlayerId, PlayerId)> for UnorderedPair {
    type Error = PairingError;
    fn try_from((a, b): (PlayerId, PlayerId)) -> Result<Self, Self::Error> {
        Self::new(a, b)
    }
}

impl From<UnorderedPair> for (PlayerId, PlayerId) {
    fn from(p: UnorderedPair) -> Self {
        (p.low, p.high)
    }
}

/// Players ordered best-first, ties resolved by a deterministic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Standings {
    entries: Vec<(PlayerId, Rating)>,
}

impl Standings {
    /// Sorts descending by rating, equal ratings by player id.
    pub fn new(entries: Vec<(PlayerId, Rating)>) -> Result<Self, PairingError> {
        Self::check_unique(&entries)?;
        let mut entries = entries;
        entries.sort_by(|a, b| b.1 .0.total_cmp(&a.1 .0).then_with(|| a.0.cmp(&b.0)));
        Ok(Self { entries })
    }

    pub fn from_book(book: &RatingBook) -> Self {
        Self::new(book.iter().map(|(p, r)| (p.clone(), r)).collect())
            .expect("rating book keys are unique")
    }

    /// Like [`Standings::from_book`] but equal ratings are ordered by a seeded shuffle.
    pub fn from_book_shuffled(book: &RatingBook, seed: u64) -> Self {
        let mut ids: Vec<PlayerId> = book.iter().map(|(p, _)| p.clone()).collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let rank: HashMap<&PlayerId, usize> = ids.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let mut entries: Vec<_> = book.iter().map(|(p, r)| (p.clone(), r)).collect();
        entries.sort_by(|a, b| b.1 .0.total_cmp(&a.1 .0).then_with(|| rank[&a.0].cmp(&rank[&b.0])));
        Self { entries }
    }

    fn check_unique(entries: &[(PlayerId, Rating)]) -> Result<(), PairingError> {
        let mut seen = HashSet::new();
        for (p, _) in entries {
            if !seen.insert(p) {
                return Err(PairingError::DuplicatePlayer(p.clone()));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[(PlayerId, Rating)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Every pair that has already been scheduled in this tournament, and who sat out.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchHistory {
    played: BTreeSet<UnorderedPair>,
    #[serde(default)]
    byes: BTreeMap<PlayerId, usize>,
}

impl MatchHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a pair; returns `false` if it had been played before.
    pub fn record(&mut self, pair: UnorderedPair) -> bool {
        self.played.insert(pair)
    }

    pub fn contains(&self, pair: &UnorderedPair) -> bool {
        self.played.contains(pair)
    }

    pub fn record_bye(&mut self, player: PlayerId) {
        *self.byes.entry(player).or_default() += 1;
    }

    pub fn bye_count(&self, player: &PlayerId) -> usize {
        self.byes.get(player).copied().unwrap_or(0)
    }

    pub fn has_played(&self, a: &PlayerId, b: &PlayerId) -> bool {
        match UnorderedPair::new(a.clone(), b.clone()) {
            Ok(pair) => self.played.contains(&pair),
            Err(_) => false,
        }
    }

    pub fn len(&self) -> usize {
        self.played.len()
    }

    pub fn is_empty(&self) -> bool {
        self.played.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &UnorderedPair> {
        self.played.iter()
    }
}

/// Matches scheduled for one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundPairing {
    /// Board order: the pair containing the best-ranked player comes first.
    pub matches: Vec<UnorderedPair>,
    pub bye: Option<PlayerId>,
    /// How many of `matches` were already in the history.
    pub rematch_count: usize,
}

impl RoundPairing {
    pub fn players(&self) -> impl Iterator<Item = &PlayerId> {
        self.matches
            .iter()
            .flat_map(|p| [p.low(), p.high()])
            .chain(self.bye.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingPolicy {
    /// Prefer matchings that leave a rematch-free matching available for the next round.
    pub lookahead: bool,
}

impl Default for PairingPolicy {
    fn default() -> Self {
        Self { lookahead: true }
    }
}

pub fn generate_round(standings: &Standings, history: &MatchHistory) -> Result<RoundPairing, PairingError> {
    generate_round_with(standings, history, PairingPolicy::default())
}

pub fn generate_round_with(
    standings: &Standings,
    history: &MatchHistory,
    policy: PairingPolicy,
) -> Result<RoundPairing, PairingError> {
    let n = standings.len();
    if n < 2 {
        return Err(PairingError::ArenaTooSmall(n));
    }
    if n + n % 2 > MAX_PLAYERS {
        return Err(PairingError::ArenaTooLarge(n));
    }
    let field = Field::new(standings, history);

    // Bye candidates from the bottom of the standings upward, skipping players
    // who already sat out while anyone else has not.
    let bye_candidates: Vec<Option<usize>> = if n % 2 == 1 {
        let fewest = (0..n).map(|i| history.bye_count(&standings.entries[i].0)).min().unwrap_or(0);
        (0..n)
            .rev()
            .filter(|&i| history.bye_count(&standings.entries[i].0) == fewest)
            .map(Some)
            .collect()
    } else {
        vec![None]
    };

    if policy.lookahead {
        let mut budget = LOOKAHEAD_BUDGET;
        for &bye in &bye_candidates {
            if let Some(m) = field.rematch_free_lookahead(bye, &mut budget) {
                return Ok(field.to_round(m, bye));
            }
        }
    }
    for &bye in &bye_candidates {
        if let Some(m) = field.rematch_free(bye) {
            return Ok(field.to_round(m, bye));
        }
    }
    let mut best: Option<(Cost, Matching, Option<usize>)> = None;
    for &bye in &bye_candidates {
        let (cost, m) = field.least_rematches(bye);
        if best.as_ref().is_none_or(|(c, _, _)| cost.better_than(c)) {
            best = Some((cost, m, bye));
        }
    }
    let (_, m, bye) = best.expect("at least one bye candidate");
    Ok(field.to_round(m, bye))
}

#[derive(Debug, Clone, Copy)]
struct Cost {
    rematches: u32,
    gap: f64,
}

impl Cost {
    fn better_than(&self, other: &Cost) -> bool {
        (self.rematches, self.gap).partial_cmp(&(other.rematches, other.gap)) == Some(std::cmp::Ordering::Less)
    }

    fn add(self, rematch: bool, gap: f64) -> Cost {
        Cost { rematches: self.rematches + rematch as u32, gap: self.gap + gap }
    }
}

/// Index-based view of standings and history used by the searches.
///
/// Odd fields get a phantom vertex after the real players; sitting out is
/// "playing" the phantom, so bye history takes part in the lookahead.
struct Field<'a> {
    standings: &'a Standings,
    ratings: Vec<f64>,
    played: Vec<u128>,
    phantom: Option<usize>,
}

impl<'a> Field<'a> {
    fn new(standings: &'a Standings, history: &MatchHistory) -> Self {
        let n = standings.len();
        let phantom = (n % 2 == 1).then_some(n);
        let index: HashMap<&PlayerId, usize> =
            standings.entries.iter().enumerate().map(|(i, (p, _))| (p, i)).collect();
        let mut played = vec![0u128; n + phantom.is_some() as usize];
        for pair in history.iter() {
            if let (Some(&i), Some(&j)) = (index.get(pair.low()), index.get(pair.high())) {
                played[i] |= 1 << j;
                played[j] |= 1 << i;
            }
        }
        if let Some(ph) = phantom {
            for (i, (p, _)) in standings.entries.iter().enumerate() {
                if history.bye_count(p) > 0 {
                    played[i] |= 1 << ph;
                    played[ph] |= 1 << i;
                }
            }
        }
        let ratings = standings.entries.iter().map(|(_, r)| r.0).collect();
        Self { standings, ratings, played, phantom }
    }

    /// Vertex count including the phantom.
    fn n(&self) -> usize {
        self.played.len()
    }

    fn initial_mask(&self, bye: Option<usize>) -> u128 {
        match (bye, self.phantom) {
            (Some(b), Some(ph)) => 1u128 << b | 1u128 << ph,
            _ => 0,
        }
    }

    fn full_mask(&self) -> u128 {
        if self.n() == 128 { u128::MAX } else { (1u128 << self.n()) - 1 }
    }

    fn first_free(&self, used: u128) -> Option<usize> {
        let free = !used & self.full_mask();
        (free != 0).then(|| free.trailing_zeros() as usize)
    }

    fn rematch_free(&self, bye: Option<usize>) -> Option<Vec<(usize, usize)>> {
        let mut path = Vec::with_capacity(self.n() / 2);
        dfs_plain(&self.played, self.full_mask(), self.initial_mask(bye), &mut path, &mut HashSet::new())
            .then_some(path)
    }

    fn rematch_free_lookahead(&self, bye: Option<usize>, budget: &mut usize) -> Option<Vec<(usize, usize)>> {
        let mut path = Vec::with_capacity(self.n() / 2);
        self.dfs_lookahead(self.initial_mask(bye), bye, &mut path, budget).then_some(path)
    }

    fn dfs_lookahead(
        &self,
        used: u128,
        bye: Option<usize>,
        path: &mut Vec<(usize, usize)>,
        budget: &mut usize,
    ) -> bool {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let Some(i) = self.first_free(used) else {
            return self.remainder_completable(path, bye, budget);
        };
        for j in (i + 1)..self.n() {
            if used & (1 << j) != 0 || self.played[i] & (1 << j) != 0 {
                continue;
            }
            path.push((i, j));
            if self.dfs_lookahead(used | 1 << i | 1 << j, bye, path, budget) {
                return true;
            }
            path.pop();
        }
        false
    }

    /// Whether the unplayed graph left after `path` still yields more
    /// rematch-free rounds: every remaining round when few are left, the next
    /// one otherwise.
    fn remainder_completable(&self, path: &[(usize, usize)], bye: Option<usize>, budget: &mut usize) -> bool {
        let mut played = self.played.clone();
        let mut add = |i: usize, j: usize| {
            played[i] |= 1 << j;
            played[j] |= 1 << i;
        };
        for &(i, j) in path {
            add(i, j);
        }
        if let (Some(b), Some(ph)) = (bye, self.phantom) {
            add(b, ph);
        }
        let full = self.full_mask();
        let degree = (0..self.n()).map(|v| (!played[v] & full & !(1 << v)).count_ones()).min().unwrap_or(0);
        let steps = if degree as usize <= DEEP_LOOKAHEAD_DEGREE { degree } else { 1 };
        factorable(&mut played, full, steps, budget)
    }

    fn least_rematches(&self, bye: Option<usize>) -> (Cost, Vec<(usize, usize)>) {
        let start = self.initial_mask(bye);
        if self.n() <= EXACT_FALLBACK_MAX {
            let mut memo = HashMap::new();
            let cost = self.dp(start, &mut memo);
            let mut used = start;
            let mut m = Vec::new();
            while let Some(i) = self.first_free(used) {
                let j = memo[&used].1;
                m.push((i, j));
                used |= 1 << i | 1 << j;
            }
            (cost, m)
        } else {
            // Greedy: nearest unplayed opponent, nearest opponent otherwise.
            let mut used = start;
            let mut m = Vec::new();
            let mut cost = Cost { rematches: 0, gap: 0.0 };
            while let Some(i) = self.first_free(used) {
                let free: Vec<usize> = ((i + 1)..self.n()).filter(|&j| used & (1 << j) == 0).collect();
                let j = free
                    .iter()
                    .copied()
                    .find(|&j| self.played[i] & (1 << j) == 0)
                    .unwrap_or(free[0]);
                cost = cost.add(self.played[i] & (1 << j) != 0, self.gap(i, j));
                m.push((i, j));
                used |= 1 << i | 1 << j;
            }
            (cost, m)
        }
    }

    /// Exact minimum of (rematches, total gap) over matchings of the unused players.
    fn dp(&self, used: u128, memo: &mut HashMap<u128, (Cost, usize)>) -> Cost {
        let Some(i) = self.first_free(used) else {
            return Cost { rematches: 0, gap: 0.0 };
        };
        if let Some((c, _)) = memo.get(&used) {
            return *c;
        }
        let mut best: Option<(Cost, usize)> = None;
        for j in (i + 1)..self.n() {
            if used & (1 << j) != 0 {
                continue;
            }
            let rest = self.dp(used | 1 << i | 1 << j, memo);
            let c = rest.add(self.played[i] & (1 << j) != 0, self.gap(i, j));
            if best.as_ref().is_none_or(|(b, _)| c.better_than(b)) {
                best = Some((c, j));
            }
        }
        let best = best.expect("even number of free players");
        memo.insert(used, best);
        best.0
    }

    fn gap(&self, i: usize, j: usize) -> f64 {
        (self.ratings[i] - self.ratings[j]).abs()
    }

    fn to_round(&self, m: Vec<(usize, usize)>, bye: Option<usize>) -> RoundPairing {
        let id = |i: usize| self.standings.entries[i].0.clone();
        let mut m = m;
        m.sort_unstable();
        let rematch_count = m.iter().filter(|&&(i, j)| self.played[i] & (1 << j) != 0).count();
        RoundPairing {
            matches: m
                .into_iter()
                .map(|(i, j)| UnorderedPair::new(id(i), id(j)).expect("distinct indices"))
                .collect(),
            bye: bye.map(id),
            rematch_count,
        }
    }
}

/// Depth-first search for a perfect matching on unplayed edges among the vertices
/// not in `used`; dead masks are memoized because feasibility of the remainder
/// depends only on who is left.
fn dfs_plain(played: &[u128], full: u128, used: u128, path: &mut Vec<(usize, usize)>, dead: &mut HashSet<u128>) -> bool {
    let free = !used & full;
    if free == 0 {
        return true;
    }
    if dead.contains(&used) {
        return false;
    }
    let i = free.trailing_zeros() as usize;
    let mut options = free & !played[i] & !(1 << i);
    while options != 0 {
        let j = options.trailing_zeros() as usize;
        options &= options - 1;
        path.push((i, j));
        if dfs_plain(played, full, used | 1 << i | 1 << j, path, dead) {
            return true;
        }
        path.pop();
    }
    dead.insert(used);
    false
}

/// Whether `steps` edge-disjoint perfect matchings exist on the unplayed graph.
fn factorable(played: &mut [u128], full: u128, steps: u32, budget: &mut usize) -> bool {
    match steps {
        0 => true,
        1 => dfs_plain(played, full, 0, &mut Vec::new(), &mut HashSet::new()),
        _ => peel(played, full, steps, 0, &mut Vec::new(), budget),
    }
}

/// Extends a partial matching; once complete, removes it and asks for `steps - 1` more.
fn peel(played: &mut [u128], full: u128, steps: u32, used: u128, path: &mut Vec<(usize, usize)>, budget: &mut usize) -> bool {
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    let free = !used & full;
    if free == 0 {
        let toggle = |played: &mut [u128], path: &[(usize, usize)]| {
            for &(i, j) in path {
                played[i] ^= 1 << j;
                played[j] ^= 1 << i;
            }
        };
        toggle(played, path);
        let ok = factorable(played, full, steps - 1, budget);
        toggle(played, path);
        return ok;
    }
    let i = free.trailing_zeros() as usize;
    let mut options = free & !played[i] & !(1 << i);
    while options != 0 {
        let j = options.trailing_zeros() as usize;
        options &= options - 1;
        path.push((i, j));
        if peel(played, full, steps, used | 1 << i | 1 << j, path, budget) {
            return true;
        }
        path.pop();
    }
    false
}

/// `ceil(log2 n)`, the usual minimum number of Swiss rounds for `n` players.
pub fn min_recommended_rounds(n: usize) -> Result<u32, PairingError> {
    if n < 2 {
        return Err(PairingError::ArenaTooSmall(n));
    }
    Ok(usize::BITS - (n - 1).leading_zeros())
}

/// Fraction of all `C(n, 2)` pairs compared after `rounds` full rounds, capped at 1.
pub fn coverage_fraction(n: usize, rounds: usize) -> Result<f64, PairingError> {
    if n < 2 {
        return Err(PairingError::ArenaTooSmall(n));
    }
    let all = (n * (n - 1) / 2) as f64;
    Ok(((rounds * (n / 2)) as f64 / all).min(1.0))
}

/// Circle-method round robin. Even `n` gives `n - 1` rounds; odd `n` gives `n`
/// rounds with one bye each.
pub fn round_robin_schedule(players: &[PlayerId]) -> Result<Vec<RoundPairing>, PairingError> {
    let n = players.len();
    if n < 2 {
        return Err(PairingError::ArenaTooSmall(n));
    }
    let mut seen = HashSet::new();
    for p in players {
        if !seen.insert(p) {
            return Err(PairingError::DuplicatePlayer(p.clone()));
        }
    }
    let mut slots: Vec<Option<&PlayerId>> = players.iter().map(Some).collect();
    if n % 2 == 1 {
        slots.push(None);
    }
    let m = slots.len();
    let mut rounds = Vec::with_capacity(m - 1);
    for _ in 0..(m - 1) {
        let mut matches = Vec::with_capacity(m / 2);
        let mut bye = None;
        for k in 0..m / 2 {
            match (slots[k], slots[m - 1 - k]) {
                (Some(a), Some(b)) => matches.push(UnorderedPair::new(a.clone(), b.clone())?),
                (Some(p), None) | (None, Some(p)) => bye = Some(p.clone()),
                (None, None) => unreachable!("only one empty slot"),
            }
        }
        rounds.push(RoundPairing { matches, bye, rematch_count: 0 });
        // Keep slot 0 fixed and rotate the rest one step.
        slots[1..].rotate_right(1);
    }
    Ok(rounds)
}
