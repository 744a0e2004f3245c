//! Cross-checks the production allocation routes against the naive oracles
//! on seeded random games.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sensa::allocations::{
    pme_from_game, proportional_values_random_order, shapley_from_game, shapley_permutation,
    PermutationSampler, PME_TAU_EXACT,
};
use sensa::game::CooperativeGame;
use sensa::oracle::{proportional_bruteforce, shapley_bruteforce};

/// Random game with worths bounded away from zero (no zero-set structure).
fn random_game(d: usize, rng: &mut ChaCha8Rng) -> CooperativeGame {
    let len = 1usize << d;
    let mut values = vec![0.0f64; len];
    for v in values.iter_mut().skip(1) {
        *v = rng.gen_range(0.05..1.0);
    }
    values[len - 1] = 1.0;
    CooperativeGame::from_values(d, values).unwrap()
}

#[test]
fn shapley_routes_match_bruteforce() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..200 {
        let d = rng.gen_range(2..=6);
        let g = random_game(d, &mut rng);
        let reference = shapley_bruteforce(&g).unwrap();
        let moebius = shapley_from_game(&g).unwrap();
        let orders = shapley_permutation(&g, PermutationSampler::Exhaustive).unwrap();
        for i in 0..d {
            assert!(
                (moebius.shares[i] - reference[i]).abs() < 1e-10,
                "trial {trial}, player {i}: moebius {} vs oracle {}",
                moebius.shares[i],
                reference[i]
            );
            assert!(
                (orders.shares[i] - reference[i]).abs() < 1e-10,
                "trial {trial}, player {i}: permutation {} vs oracle {}",
                orders.shares[i],
                reference[i]
            );
        }
    }
}

#[test]
fn proportional_values_match_bruteforce() {
    let mut rng = ChaCha8Rng::seed_from_u64(4096);
    for trial in 0..200 {
        let d = rng.gen_range(2..=6);
        let g = random_game(d, &mut rng);
        let reference = proportional_bruteforce(&g).unwrap();
        let production = proportional_values_random_order(&g).unwrap();
        for i in 0..d {
            assert!(
                (production.shares[i] - reference[i]).abs() < 1e-9,
                "trial {trial}, player {i}: {} vs oracle {}",
                production.shares[i],
                reference[i]
            );
        }
    }
}

#[test]
fn pme_without_zero_set_matches_bruteforce_on_dual() {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    for trial in 0..100 {
        let d = rng.gen_range(2..=5);
        // Keep proper worths ≤ 0.9 so every dual worth is ≥ 0.1: no zero set.
        let len = 1usize << d;
        let mut values = vec![0.0f64; len];
        for v in values.iter_mut().skip(1) {
            *v = rng.gen_range(0.05..0.9);
        }
        values[len - 1] = 1.0;
        let g = CooperativeGame::from_values(d, values).unwrap();
        let reference = proportional_bruteforce(&g.dual()).unwrap();
        let pme = pme_from_game(&g, PME_TAU_EXACT).unwrap();
        for i in 0..d {
            assert!(
                (pme.shares[i] - reference[i]).abs() < 1e-9,
                "trial {trial}, player {i}: {} vs oracle {}",
                pme.shares[i],
                reference[i]
            );
        }
    }
}
