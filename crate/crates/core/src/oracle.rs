//! Deliberately naive reference implementations for cross-checking the
//! production allocation routes. Nothing here shares code with
//! [`crate::allocations`]: permutations are enumerated recursively and
//! weights are carried in linear space, so an agreement between the two is
//! meaningful evidence rather than a tautology.

use thiserror::Error;

use crate::game::{Coalition, CooperativeGame};

/// Brute-force Shapley is capped at this many players (8! = 40320 orders).
pub const MAX_BRUTEFORCE_SHAPLEY: usize = 8;
/// Brute-force proportional values are capped lower: linear-space weights
/// lose accuracy fast as products of reciprocals grow.
pub const MAX_BRUTEFORCE_PROPORTIONAL: usize = 6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{d} players exceed the brute-force maximum of {max}")]
    TooManyPlayers { d: usize, max: usize },
    #[error("prefix coalition {0} has non-positive worth {1}; linear-space weights are undefined")]
    ZeroPrefix(Coalition, f64),
}

/// Shapley values by direct recursive enumeration of all player orders.
pub fn shapley_bruteforce(game: &CooperativeGame) -> Result<Vec<f64>, OracleError> {
    let d = game.players();
    if d > MAX_BRUTEFORCE_SHAPLEY {
        return Err(OracleError::TooManyPlayers {
            d,
            max: MAX_BRUTEFORCE_SHAPLEY,
        });
    }
    let mut sums = vec![0.0f64; d];
    let mut used = vec![false; d];
    let mut order = Vec::with_capacity(d);
    let mut count = 0u64;
    recurse_orders(d, &mut used, &mut order, &mut |perm| {
        let mut members: Vec<usize> = Vec::with_capacity(d);
        let mut prev = game.value(Coalition::EMPTY);
        for &p in perm {
            members.push(p);
            let cur = game.value(Coalition::from_members(&members));
            sums[p] += cur - prev;
            prev = cur;
        }
        count += 1;
    });
    Ok(sums.into_iter().map(|s| s / count as f64).collect())
}

/// Proportional values by direct enumeration with linear-space weights
/// `Π_j 1/v(C_j)`. Refuses games where any nonempty prefix has worth ≤ 0.
pub fn proportional_bruteforce(game: &CooperativeGame) -> Result<Vec<f64>, OracleError> {
    let d = game.players();
    if d > MAX_BRUTEFORCE_PROPORTIONAL {
        return Err(OracleError::TooManyPlayers {
            d,
            max: MAX_BRUTEFORCE_PROPORTIONAL,
        });
    }
    // Every nonempty coalition can appear as a prefix, so validate up front.
    for mask in 1..game.values().len() {
        let worth = game.values()[mask];
        if worth <= 0.0 {
            return Err(OracleError::ZeroPrefix(
                Coalition::from_mask(mask as u32),
                worth,
            ));
        }
    }
    let mut weight_sum = 0.0f64;
    let mut numerators = vec![0.0f64; d];
    let mut used = vec![false; d];
    let mut order = Vec::with_capacity(d);
    recurse_orders(d, &mut used, &mut order, &mut |perm| {
        let mut members: Vec<usize> = Vec::with_capacity(d);
        let mut weight = 1.0f64;
        let mut marginals = Vec::with_capacity(d);
        let mut prev = game.value(Coalition::EMPTY);
        for &p in perm {
            members.push(p);
            let cur = game.value(Coalition::from_members(&members));
            weight /= cur;
            marginals.push((p, cur - prev));
            prev = cur;
        }
        weight_sum += weight;
        for (p, marginal) in marginals {
            numerators[p] += weight * marginal;
        }
    });
    Ok(numerators.into_iter().map(|x| x / weight_sum).collect())
}

fn recurse_orders(
    d: usize,
    used: &mut Vec<bool>,
    order: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if order.len() == d {
        visit(order);
        return;
    }
    for p in 0..d {
        if !used[p] {
            used[p] = true;
            order.push(p);
            recurse_orders(d, used, order, visit);
            order.pop();
            used[p] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bruteforce_shapley_on_glove_game() {
        let g = CooperativeGame::from_values(
            3,
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let shares = shapley_bruteforce(&g).unwrap();
        assert!((shares[0] - 1.0 / 6.0).abs() < 1e-14);
        assert!((shares[1] - 1.0 / 6.0).abs() < 1e-14);
        assert!((shares[2] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn bruteforce_proportional_two_player_example() {
        let g = CooperativeGame::from_values(2, vec![0.0, 0.6, 0.3, 1.0]).unwrap();
        let shares = proportional_bruteforce(&g).unwrap();
        assert!((shares[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((shares[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn bruteforce_proportional_refuses_zero_prefix() {
        let g = CooperativeGame::from_values(2, vec![0.0, 0.0, 0.3, 1.0]).unwrap();
        assert!(matches!(
            proportional_bruteforce(&g),
            Err(OracleError::ZeroPrefix(_, _))
        ));
    }

    #[test]
    fn bruteforce_caps_player_counts() {
        let g = CooperativeGame::from_values(9, vec![0.0; 512]).unwrap();
        assert!(matches!(
            shapley_bruteforce(&g),
            Err(OracleError::TooManyPlayers { max: 8, .. })
        ));
        let g7 = CooperativeGame::from_values(7, vec![0.0; 128]).unwrap();
        assert!(matches!(
            proportional_bruteforce(&g7),
            Err(OracleError::TooManyPlayers { max: 6, .. })
        ));
    }
}
