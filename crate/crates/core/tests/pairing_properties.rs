use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skillarena_core::pairing::{generate_round, MatchHistory, Standings};
use skillarena_core::ratings::{MatchResult, Outcome, PlayerId, RatingBook};

/// Plays `rounds` Swiss rounds with random outcomes; returns total rematches.
fn play(n: usize, rounds: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let players: Vec<PlayerId> = (0..n).map(|i| PlayerId::from(format!("p{i:02}").as_str())).collect();
    let mut book = RatingBook::with_players(players.iter().cloned(), 32.0).unwrap();
    let mut history = MatchHistory::new();
    let mut rematches = 0;
    for _ in 0..rounds {
        let pairing = generate_round(&Standings::from_book(&book), &history).unwrap();
        rematches += pairing.rematch_count;
        let mut seen: Vec<&PlayerId> = pairing.players().collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), n, "partition");
        let results: Vec<_> = pairing
            .matches
            .iter()
            .map(|m| {
                let o = [Outcome::FirstWins, Outcome::SecondWins, Outcome::Draw][rng.gen_range(0..3)];
                MatchResult::new(m.low().clone(), m.high().clone(), o).unwrap()
            })
            .collect();
        for m in &pairing.matches {
            history.record(m.clone());
        }
        if let Some(b) = &pairing.bye {
            history.record_bye(b.clone());
        }
        book = book.apply_round(&results).unwrap();
    }
    rematches
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn no_rematches_within_round_robin_horizon(n in 4usize..=32, frac in 0.0f64..=1.0, seed: u64) {
        let rounds = ((n - 1) as f64 * frac).round().max(1.0) as usize;
        prop_assert_eq!(play(n, rounds, seed), 0);
    }
}

#[test]
fn full_horizon_all_fields() {
    for n in 4..=32 {
        for seed in 0..3 {
            assert_eq!(play(n, n - 1, seed), 0, "n={n} seed={seed}");
        }
    }
}
