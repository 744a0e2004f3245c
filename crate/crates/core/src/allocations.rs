//! Efficiency allocations on cooperative games: Shapley effects and
//! proportional marginal effects (PME).
//!
//! Shapley values come in two independent routes — the fast Möbius transform
//! and random-order (permutation) averaging — which must agree; keeping both
//! makes each one checkable against the other. Proportional values weight each
//! player order by the reciprocal product of its prefix worths, which rewards
//! orders that pass through low-worth coalitions. PME applies the proportional
//! value to the dual (total-effect) game after carving out the coalition of
//! exogenous inputs whose dual worth is indistinguishable from zero; those
//! inputs receive exactly zero.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::game::{Coalition, CooperativeGame};

/// Zero-worth tolerance for games computed in closed form.
pub const PME_TAU_EXACT: f64 = 1e-9;
/// Zero-worth tolerance for games estimated from data.
pub const PME_TAU_ESTIMATED: f64 = 1e-4;

/// Exhaustive permutation enumeration is capped at this many players.
pub const MAX_EXHAUSTIVE_PLAYERS: usize = 10;

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("{d} players exceed the exhaustive-permutation maximum of {max}", max = MAX_EXHAUSTIVE_PLAYERS)]
    TooManyPlayers { d: usize },
    #[error("value table of length {0} is not a power of two")]
    BadTableLength(usize),
    #[error("all coalition worths are within {tau} of zero: the game carries no signal")]
    NullGame { tau: f64 },
    #[error(
        "ambiguous zero structure: the union {union} of zero-worth coalitions has worth {worth}, \
         which is not itself zero"
    )]
    AmbiguousZeroStructure { union: Coalition, worth: f64 },
    #[error("Monte Carlo sampling needs at least one permutation")]
    NoSamples,
    #[error("tolerance must be finite and positive, got {0}")]
    InvalidTolerance(f64),
    #[error("cannot renormalize: shares sum to {0}, which is a pathological estimate")]
    PathologicalEstimate(f64),
}

/// How an allocation was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AllocationMethod {
    Shapley,
    /// Proportional values of the game as given (building block for PME).
    Proportional,
    Pme,
}

impl AllocationMethod {
    pub fn name(self) -> &'static str {
        match self {
            AllocationMethod::Shapley => "shapley",
            AllocationMethod::Proportional => "proportional",
            AllocationMethod::Pme => "pme",
        }
    }
}

/// Side information accumulated while computing an allocation.
#[derive(Clone, Debug, Default)]
pub struct AllocationDiagnostics {
    /// Sum of the shares before any renormalization.
    pub raw_sum: f64,
    /// Coalitions whose worth was floored inside random-order weights.
    pub clamped: Vec<Coalition>,
    /// Detected exogenous coalition (PME only).
    pub zero_set: Option<Coalition>,
    /// Monte Carlo standard errors, when the route provides them.
    pub std_error: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Per-player shares of the grand worth.
#[derive(Clone, Debug)]
pub struct Allocation {
    pub method: AllocationMethod,
    pub shares: Vec<f64>,
    /// Whether the shares were rescaled to sum to one.
    pub normalized: bool,
    pub diagnostics: AllocationDiagnostics,
}

/// How [`shapley_permutation`] walks the permutation space.
#[derive(Clone, Copy, Debug)]
pub enum PermutationSampler {
    /// Every one of the `d!` orders, capped at [`MAX_EXHAUSTIVE_PLAYERS`].
    Exhaustive,
    /// Uniform random orders with a fixed seed.
    MonteCarlo { samples: usize, seed: u64 },
}

/// In-place fast Möbius transform of a coalition table: returns `m` with
/// `v(A) = Σ_{B ⊆ A} m(B)`.
pub fn moebius_transform(values: &[f64]) -> Result<Vec<f64>, AllocationError> {
    let len = values.len();
    if !len.is_power_of_two() {
        return Err(AllocationError::BadTableLength(len));
    }
    let d = len.trailing_zeros() as usize;
    let mut m = values.to_vec();
    for bit in 0..d {
        let step = 1usize << bit;
        for mask in 0..len {
            if mask & step != 0 {
                m[mask] -= m[mask ^ step];
            }
        }
    }
    Ok(m)
}

/// Shapley values through the Möbius route: each interaction term is split
/// evenly among its members.
pub fn shapley_from_game(game: &CooperativeGame) -> Result<Allocation, AllocationError> {
    let d = game.players();
    let m = moebius_transform(game.values())?;
    let mut shares = vec![0.0f64; d];
    for (mask, &coeff) in m.iter().enumerate().skip(1) {
        let size = mask.count_ones() as f64;
        let each = coeff / size;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            shares[i] += each;
            bits &= bits - 1;
        }
    }
    Ok(finish_allocation(AllocationMethod::Shapley, shares, None))
}

/// Shapley values through the random-order route: the average marginal
/// contribution over player orders.
pub fn shapley_permutation(
    game: &CooperativeGame,
    sampler: PermutationSampler,
) -> Result<Allocation, AllocationError> {
    let d = game.players();
    match sampler {
        PermutationSampler::Exhaustive => {
            if d > MAX_EXHAUSTIVE_PLAYERS {
                return Err(AllocationError::TooManyPlayers { d });
            }
            let mut sums = vec![0.0f64; d];
            let mut count = 0u64;
            for_each_permutation(d, |perm| {
                let mut mask = 0u32;
                let mut prev = 0.0;
                for &player in perm {
                    mask |= 1 << player;
                    let cur = game.values()[mask as usize];
                    sums[player] += cur - prev;
                    prev = cur;
                }
                count += 1;
            });
            let shares = sums.iter().map(|s| s / count as f64).collect();
            Ok(finish_allocation(AllocationMethod::Shapley, shares, None))
        }
        PermutationSampler::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(AllocationError::NoSamples);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..d).collect();
            let mut sums = vec![0.0f64; d];
            let mut sumsq = vec![0.0f64; d];
            for _ in 0..samples {
                perm.shuffle(&mut rng);
                let mut mask = 0u32;
                let mut prev = 0.0;
                for &player in &perm {
                    mask |= 1 << player;
                    let cur = game.values()[mask as usize];
                    let marginal = cur - prev;
                    sums[player] += marginal;
                    sumsq[player] += marginal * marginal;
                    prev = cur;
                }
            }
            let n = samples as f64;
            let shares: Vec<f64> = sums.iter().map(|s| s / n).collect();
            let std_error = if samples >= 2 {
                Some(
                    shares
                        .iter()
                        .zip(&sumsq)
                        .map(|(&mean, &sq)| {
                            let var = (sq - n * mean * mean).max(0.0) / (n - 1.0);
                            (var / n).sqrt()
                        })
                        .collect(),
                )
            } else {
                None
            };
            Ok(finish_allocation(
                AllocationMethod::Shapley,
                shares,
                std_error,
            ))
        }
    }
}

/// Proportional values of the game itself, by weighted random orders:
/// order `π` carries weight `1 / Π_j v(C_j(π))` over its prefix coalitions.
///
/// Prefix worths are floored at [`PME_TAU_EXACT`] inside the weights (the
/// marginal contributions always use raw worths), and every floored coalition
/// is reported in the diagnostics.
pub fn proportional_values_random_order(
    game: &CooperativeGame,
) -> Result<Allocation, AllocationError> {
    let d = game.players();
    if d > MAX_EXHAUSTIVE_PLAYERS {
        return Err(AllocationError::TooManyPlayers { d });
    }
    let values = game.values();
    if values.iter().skip(1).all(|v| v.abs() <= PME_TAU_EXACT) {
        return Err(AllocationError::NullGame {
            tau: PME_TAU_EXACT,
        });
    }
    let (shares, clamped) = proportional_core(d, |mask| values[mask as usize], PME_TAU_EXACT);
    let mut alloc = finish_allocation(AllocationMethod::Proportional, shares, None);
    alloc.diagnostics.clamped = clamped;
    note_clamping(&mut alloc.diagnostics);
    Ok(alloc)
}

/// Proportional marginal effects: proportional values of the dual game,
/// restricted to the players whose total effect is distinguishable from zero.
///
/// The zero set `Z` is the union of every coalition with `|w(A)| ≤ tau`; the
/// union must itself be zero-worth, otherwise the zero structure is ambiguous
/// and no PME exists. Players in `Z` receive exactly 0, and the rest split
/// `w(D) − w(Z)` through the shifted game `B ↦ w(Z ∪ B)`.
pub fn pme_from_game(
    game: &CooperativeGame,
    tau: f64,
) -> Result<Allocation, AllocationError> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(AllocationError::InvalidTolerance(tau));
    }
    let d = game.players();
    let dual = game.dual();
    let w = dual.values();
    if w.iter().skip(1).all(|v| v.abs() <= tau) {
        return Err(AllocationError::NullGame { tau });
    }

    let mut union = 0u32;
    for (mask, &worth) in w.iter().enumerate().skip(1) {
        if worth.abs() <= tau {
            union |= mask as u32;
        }
    }
    let zero_set = Coalition::from_mask(union);
    if union != 0 {
        let worth = w[union as usize];
        if worth.abs() > tau {
            return Err(AllocationError::AmbiguousZeroStructure {
                union: zero_set,
                worth,
            });
        }
    }

    let rest: Vec<usize> = (0..d).filter(|i| !zero_set.contains(*i)).collect();
    let dr = rest.len();
    if dr > MAX_EXHAUSTIVE_PLAYERS {
        return Err(AllocationError::TooManyPlayers { d: dr });
    }
    // Shifted restricted game over the live players. Efficiency telescopes to
    // w(D) − w(Z) regardless of the shift at ∅.
    let (restricted, clamped_restricted) = proportional_core(
        dr,
        |mask| {
            let mut full = union;
            let mut bits = mask;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                full |= 1 << rest[j];
                bits &= bits - 1;
            }
            w[full as usize]
        },
        tau,
    );
    let mut shares = vec![0.0f64; d];
    for (j, &player) in rest.iter().enumerate() {
        shares[player] = restricted[j];
    }
    let clamped = clamped_restricted
        .iter()
        .map(|c| {
            let mut full = union;
            for j in c.members() {
                full |= 1 << rest[j];
            }
            Coalition::from_mask(full)
        })
        .collect();

    let mut alloc = finish_allocation(AllocationMethod::Pme, shares, None);
    alloc.diagnostics.zero_set = Some(zero_set);
    alloc.diagnostics.clamped = clamped;
    note_clamping(&mut alloc.diagnostics);
    Ok(alloc)
}

/// Dispatches to a method's production route. PME's zero-worth tolerance is
/// chosen by the game's provenance: [`PME_TAU_ESTIMATED`] for games estimated
/// from data, [`PME_TAU_EXACT`] for closed-form games.
pub fn allocate(
    game: &CooperativeGame,
    method: AllocationMethod,
) -> Result<Allocation, AllocationError> {
    match method {
        AllocationMethod::Shapley => shapley_from_game(game),
        AllocationMethod::Proportional => proportional_values_random_order(game),
        AllocationMethod::Pme => {
            let tau = if game.is_estimated() {
                PME_TAU_ESTIMATED
            } else {
                PME_TAU_EXACT
            };
            pme_from_game(game, tau)
        }
    }
}

/// Rescales the shares to sum to one. Standard errors, if any, are scaled by
/// the same factor.
pub fn renormalize(alloc: &Allocation) -> Result<Allocation, AllocationError> {
    let sum: f64 = alloc.shares.iter().sum();
    if !sum.is_finite() || sum <= 0.0 {
        return Err(AllocationError::PathologicalEstimate(sum));
    }
    let mut out = alloc.clone();
    for s in &mut out.shares {
        *s /= sum;
    }
    if let Some(se) = &mut out.diagnostics.std_error {
        for e in se {
            *e /= sum;
        }
    }
    out.normalized = true;
    Ok(out)
}

/// Weighted random-order core shared by proportional values and PME.
///
/// Runs two passes over all `d!` orders (Heap's algorithm): the first finds
/// the maximum log-weight for a stable shift, the second accumulates the
/// weighted marginals. Returns the shares and the coalitions floored inside
/// the weights.
fn proportional_core(
    d: usize,
    value: impl Fn(u32) -> f64,
    floor: f64,
) -> (Vec<f64>, Vec<Coalition>) {
    if d == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut clamped = vec![false; 1usize << d];
    let mut max_logw = f64::NEG_INFINITY;
    for_each_permutation(d, |perm| {
        let mut mask = 0u32;
        let mut logw = 0.0f64;
        for &player in perm {
            mask |= 1 << player;
            let raw = value(mask);
            let clamped_value = if raw < floor {
                clamped[mask as usize] = true;
                floor
            } else {
                raw
            };
            logw -= clamped_value.ln();
        }
        if logw > max_logw {
            max_logw = logw;
        }
    });

    let mut weight_sum = 0.0f64;
    let mut numerators = vec![0.0f64; d];
    let mut marginals = vec![0.0f64; d];
    for_each_permutation(d, |perm| {
        let mut mask = 0u32;
        let mut logw = 0.0f64;
        let mut prev = value(0);
        for (pos, &player) in perm.iter().enumerate() {
            mask |= 1 << player;
            let raw = value(mask);
            logw -= raw.max(floor).ln();
            marginals[pos] = raw - prev;
            prev = raw;
        }
        let weight = (logw - max_logw).exp();
        weight_sum += weight;
        for (pos, &player) in perm.iter().enumerate() {
            numerators[player] += weight * marginals[pos];
        }
    });

    let shares = numerators.iter().map(|n| n / weight_sum).collect();
    let clamped_coalitions = clamped
        .iter()
        .enumerate()
        .filter(|(_, &c)| c)
        .map(|(mask, _)| Coalition::from_mask(mask as u32))
        .collect();
    (shares, clamped_coalitions)
}

fn finish_allocation(
    method: AllocationMethod,
    shares: Vec<f64>,
    std_error: Option<Vec<f64>>,
) -> Allocation {
    let raw_sum = shares.iter().sum();
    let mut warnings = Vec::new();
    for (i, &s) in shares.iter().enumerate() {
        if s < 0.0 {
            warnings.push(format!("negative share {s:.3e} for input {i}"));
        }
    }
    Allocation {
        method,
        shares,
        normalized: false,
        diagnostics: AllocationDiagnostics {
            raw_sum,
            clamped: Vec::new(),
            zero_set: None,
            std_error,
            warnings,
        },
    }
}

fn note_clamping(diag: &mut AllocationDiagnostics) {
    if !diag.clamped.is_empty() {
        diag.warnings.push(format!(
            "{} coalition worths floored inside random-order weights",
            diag.clamped.len()
        ));
    }
}

/// Heap's algorithm: visits each permutation of `0..d` exactly once.
fn for_each_permutation(d: usize, mut visit: impl FnMut(&[usize])) {
    let mut arr: Vec<usize> = (0..d).collect();
    let mut c = vec![0usize; d];
    visit(&arr);
    let mut i = 0;
    while i < d {
        if c[i] < i {
            if i % 2 == 0 {
                arr.swap(0, i);
            } else {
                arr.swap(c[i], i);
            }
            visit(&arr);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}
