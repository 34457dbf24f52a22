//! ELO expected scores and rating updates.
//!
//! Ratings start at zero. A match moves both participants by
//! `K * (actual - expected)`, where the expectation is the logistic function
//! of the rating gap on the usual 400-point scale.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rating assigned to every player before the first round.
pub const INITIAL_RATING: f64 = 0.0;

/// Conventional chess K-factor, used when none is configured.
pub const DEFAULT_K_FACTOR: f64 = 32.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatingError {
    #[error("rating must be finite, got {0}")]
    NonFinite(f64),
    #[error("k-factor must be positive and finite, got {0}")]
    InvalidKFactor(f64),
    #[error("unknown player `{0}`")]
    MissingPlayer(PlayerId),
    #[error("player `{0}` appears in more than one match of the round")]
    DuplicateInRound(PlayerId),
    #[error("player `{0}` cannot play against itself")]
    SelfMatch(PlayerId),
    #[error("player `{0}` is already registered")]
    DuplicatePlayer(PlayerId),
    #[error("player id must be non-empty")]
    EmptyPlayerId,
}

/// Opaque identifier of a player (a video segment, in the annotation setting).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PlayerId(String);

impl TryFrom<String> for PlayerId {
    type Error = RatingError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<PlayerId> for String {
    fn from(p: PlayerId) -> Self {
        p.0
    }
}

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Result<Self, RatingError> {
        let id = id.into();
        if id.is_empty() {
            return Err(RatingError::EmptyPlayerId);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    /// Panics on an empty string; use [`PlayerId::new`] for untrusted input.
    fn from(s: &str) -> Self {
        Self::new(s).expect("player id must be non-empty")
    }
}

/// An ELO rating in points.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Rating(pub f64);

impl Rating {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Result of a match from the point of view of its first participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    FirstWins,
    SecondWins,
    Draw,
}

impl Outcome {
    /// Actual score of the first participant: 1 for a win, 0.5 for a draw, 0 for a loss.
    pub fn first_score(self) -> f64 {
        match self {
            Outcome::FirstWins => 1.0,
            Outcome::SecondWins => 0.0,
            Outcome::Draw => 0.5,
        }
    }

    pub fn second_score(self) -> f64 {
        1.0 - self.first_score()
    }

    /// The same result seen from the other participant.
    pub fn mirrored(self) -> Self {
        match self {
            Outcome::FirstWins => Outcome::SecondWins,
            Outcome::SecondWins => Outcome::FirstWins,
            Outcome::Draw => Outcome::Draw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub first: PlayerId,
    pub second: PlayerId,
    pub outcome: Outcome,
}

impl MatchResult {
    pub fn new(first: PlayerId, second: PlayerId, outcome: Outcome) -> Result<Self, RatingError> {
        if first == second {
            return Err(RatingError::SelfMatch(first));
        }
        Ok(Self { first, second, outcome })
    }
}

/// Expected scores `(e_a, e_b)` of two players rated `r_a` and `r_b`.
///
/// Both values come from the same logistic curve, so they sum to one up to
/// rounding. Past a gap of roughly 6000 points the larger value rounds to
/// exactly 1.0 in double precision.
pub fn expected_score(r_a: Rating, r_b: Rating) -> Result<(f64, f64), RatingError> {
    for r in [r_a.0, r_b.0] {
        if !r.is_finite() {
            return Err(RatingError::NonFinite(r));
        }
    }
    let e_a = 1.0 / (1.0 + 10f64.powf((r_b.0 - r_a.0) / 400.0));
    let e_b = 1.0 / (1.0 + 10f64.powf((r_a.0 - r_b.0) / 400.0));
    Ok((e_a, e_b))
}

/// Current ratings of every player in an arena, plus the K-factor used to update them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingBook {
    ratings: BTreeMap<PlayerId, Rating>,
    k_factor: f64,
}

impl RatingBook {
    pub fn new(k_factor: f64) -> Result<Self, RatingError> {
        if !(k_factor.is_finite() && k_factor > 0.0) {
            return Err(RatingError::InvalidKFactor(k_factor));
        }
        Ok(Self { ratings: BTreeMap::new(), k_factor })
    }

    /// A book with every player at [`INITIAL_RATING`].
    pub fn with_players<I>(players: I, k_factor: f64) -> Result<Self, RatingError>
    where
        I: IntoIterator<Item = PlayerId>,
    {
        let mut book = Self::new(k_factor)?;
        for p in players {
            book.insert(p, Rating(INITIAL_RATING))?;
        }
        Ok(book)
    }

    pub fn insert(&mut self, player: PlayerId, rating: Rating) -> Result<(), RatingError> {
        if !rating.0.is_finite() {
            return Err(RatingError::NonFinite(rating.0));
        }
        if self.ratings.contains_key(&player) {
            return Err(RatingError::DuplicatePlayer(player));
        }
        self.ratings.insert(player, rating);
        Ok(())
    }

    pub fn k_factor(&self) -> f64 {
        self.k_factor
    }

    pub fn get(&self, player: &PlayerId) -> Option<Rating> {
        self.ratings.get(player).copied()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PlayerId, Rating)> {
        self.ratings.iter().map(|(p, r)| (p, *r))
    }

    pub fn total(&self) -> f64 {
        self.ratings.values().map(|r| r.0).sum()
    }

    fn rating_of(&self, player: &PlayerId) -> Result<Rating, RatingError> {
        self.get(player).ok_or_else(|| RatingError::MissingPlayer(player.clone()))
    }

    /// Rating changes `(first, second)` a match would cause against this book.
    pub fn match_deltas(&self, result: &MatchResult) -> Result<(f64, f64), RatingError> {
        if result.first == result.second {
            return Err(RatingError::SelfMatch(result.first.clone()));
        }
        let r_first = self.rating_of(&result.first)?;
        let r_second = self.rating_of(&result.second)?;
        let (e_first, e_second) = expected_score(r_first, r_second)?;
        let k = self.k_factor;
        Ok((
            k * (result.outcome.first_score() - e_first),
            k * (result.outcome.second_score() - e_second),
        ))
    }

    /// Applies a single match and returns the updated book.
    pub fn apply_match(&self, result: &MatchResult) -> Result<Self, RatingError> {
        let (d_first, d_second) = self.match_deltas(result)?;
        let mut next = self.clone();
        next.shift(&result.first, d_first);
        next.shift(&result.second, d_second);
        Ok(next)
    }

    /// Applies a whole round at once.
    ///
    /// Every expectation is computed from the ratings at the start of the
    /// round, so the result does not depend on the order of `results`.
    pub fn apply_round(&self, results: &[MatchResult]) -> Result<Self, RatingError> {
        let mut seen = BTreeSet::new();
        let mut deltas: BTreeMap<&PlayerId, f64> = BTreeMap::new();
        for result in results {
            for p in [&result.first, &result.second] {
                if !seen.insert(p) {
                    return Err(RatingError::DuplicateInRound(p.clone()));
                }
            }
            let (d_first, d_second) = self.match_deltas(result)?;
            deltas.insert(&result.first, d_first);
            deltas.insert(&result.second, d_second);
        }
        let mut next = self.clone();
        for (p, d) in deltas {
            next.shift(p, d);
        }
        Ok(next)
    }

    fn shift(&mut self, player: &PlayerId, delta: f64) {
        if let Some(r) = self.ratings.get_mut(player) {
            r.0 += delta;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn book(entries: &[(&str, f64)]) -> RatingBook {
        let mut b = RatingBook::new(32.0).unwrap();
        for (p, r) in entries {
            b.insert(PlayerId::from(*p), Rating(*r)).unwrap();
        }
        b
    }

    fn m(a: &str, b: &str, o: Outcome) -> MatchResult {
        MatchResult::new(a.into(), b.into(), o).unwrap()
    }

    #[test]
    fn expected_score_examples() {
        assert_eq!(expected_score(Rating(100.0), Rating(100.0)).unwrap(), (0.5, 0.5));
        assert_eq!(expected_score(Rating(0.0), Rating(0.0)).unwrap(), (0.5, 0.5));
        let (ea, eb) = expected_score(Rating(0.0), Rating(400.0)).unwrap();
        assert!((ea - 1.0 / 11.0).abs() < 1e-15);
        assert!((eb - 10.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn expected_score_rejects_non_finite() {
        assert!(matches!(
            expected_score(Rating(f64::NAN), Rating(0.0)),
            Err(RatingError::NonFinite(_))
        ));
        assert!(expected_score(Rating(0.0), Rating(f64::INFINITY)).is_err());
    }

    #[test]
    fn apply_match_examples() {
        let b = book(&[("A", 0.0), ("B", 0.0)]);
        let won = b.apply_match(&m("A", "B", Outcome::FirstWins)).unwrap();
        assert_eq!(won.get(&"A".into()), Some(Rating(16.0)));
        assert_eq!(won.get(&"B".into()), Some(Rating(-16.0)));

        let drawn = b.apply_match(&m("A", "B", Outcome::Draw)).unwrap();
        assert_eq!(drawn, b);

        // 32 * (1 - 1/11) by hand: 320/11.
        let b = book(&[("A", 0.0), ("B", 400.0)]);
        let upset = b.apply_match(&m("A", "B", Outcome::FirstWins)).unwrap();
        assert!((upset.get(&"A".into()).unwrap().0 - 320.0 / 11.0).abs() < 1e-12);
        assert!((upset.get(&"B".into()).unwrap().0 - (400.0 - 320.0 / 11.0)).abs() < 1e-12);
    }

    #[test]
    fn apply_match_unknown_player() {
        let b = book(&[("A", 0.0)]);
        assert_eq!(
            b.apply_match(&m("A", "Z", Outcome::Draw)),
            Err(RatingError::MissingPlayer("Z".into()))
        );
    }

    #[test]
    fn apply_round_examples() {
        let b = book(&[("A", 0.0), ("B", 0.0), ("C", 0.0), ("D", 0.0)]);
        assert_eq!(b.apply_round(&[]).unwrap(), b);

        let round = [m("A", "B", Outcome::FirstWins), m("C", "D", Outcome::Draw)];
        let fwd = b.apply_round(&round).unwrap();
        let rev = b.apply_round(&[round[1].clone(), round[0].clone()]).unwrap();
        assert_eq!(fwd, rev);
        assert_eq!(
            fwd.iter().map(|(_, r)| r.0).collect::<Vec<_>>(),
            vec![16.0, -16.0, 0.0, 0.0]
        );
    }

    #[test]
    fn apply_round_rejects_player_twice() {
        let b = book(&[("A", 0.0), ("B", 0.0), ("C", 0.0)]);
        let err = b
            .apply_round(&[m("A", "B", Outcome::FirstWins), m("C", "A", Outcome::Draw)])
            .unwrap_err();
        assert_eq!(err, RatingError::DuplicateInRound("A".into()));
    }

    #[test]
    fn constructor_guards() {
        assert!(RatingBook::new(0.0).is_err());
        assert!(RatingBook::new(f64::NAN).is_err());
        assert!(PlayerId::new("").is_err());
        assert!(MatchResult::new("A".into(), "A".into(), Outcome::Draw).is_err());
        let mut b = book(&[("A", 0.0)]);
        assert!(b.insert("A".into(), Rating(1.0)).is_err());
    }

    proptest! {
        #[test]
        fn expectations_normalized(ra in -1e5f64..1e5, rb in -1e5f64..1e5) {
            let (ea, eb) = expected_score(Rating(ra), Rating(rb)).unwrap();
            prop_assert!((ea + eb - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn expectations_strictly_inside_unit_interval(ra in -2500.0f64..2500.0, rb in -2500.0f64..2500.0) {
            let (ea, eb) = expected_score(Rating(ra), Rating(rb)).unwrap();
            prop_assert!(ea > 0.0 && ea < 1.0 && eb > 0.0 && eb < 1.0);
        }

        #[test]
        fn expectations_translation_equivariant(
            ra in -2000.0f64..2000.0, rb in -2000.0f64..2000.0, c in -2000.0f64..2000.0
        ) {
            let (ea, eb) = expected_score(Rating(ra), Rating(rb)).unwrap();
            let (fa, fb) = expected_score(Rating(ra + c), Rating(rb + c)).unwrap();
            prop_assert!((ea - fa).abs() <= 1e-12);
            prop_assert!((eb - fb).abs() <= 1e-12);
        }

        #[test]
        fn winner_delta_decreases_with_own_rating(
            lo in -1500.0f64..1500.0, step in 1.0f64..500.0, opp in -1500.0f64..1500.0
        ) {
            let delta = |own: f64| {
                let b = book(&[("W", own), ("L", opp)]);
                b.match_deltas(&m("W", "L", Outcome::FirstWins)).unwrap().0
            };
            prop_assert!(delta(lo + step) < delta(lo));
        }

        #[test]
        fn round_is_zero_sum(
            ratings in proptest::collection::vec(-1000.0f64..1000.0, 8),
            outcomes in proptest::collection::vec(0u8..3, 4),
        ) {
            let names = ["a", "b", "c", "d", "e", "f", "g", "h"];
            let entries: Vec<_> = names.iter().copied().zip(ratings).collect();
            let b = book(&entries);
            let results: Vec<_> = outcomes.iter().enumerate().map(|(i, o)| {
                let o = [Outcome::FirstWins, Outcome::SecondWins, Outcome::Draw][*o as usize];
                m(names[2 * i], names[2 * i + 1], o)
            }).collect();
            let after = b.apply_round(&results).unwrap();
            prop_assert!((after.total() - b.total()).abs() <= 1e-9 * results.len() as f64);
        }
    }
}
