//! Cooperative games on input subsets.
//!
//! A coalition is a subset of the input indices `0..d`, stored as a bitmask.
//! A [`CooperativeGame`] assigns a worth to every coalition; for variance-based
//! sensitivity the worth of `A` is the normalized explained variance
//! `V(E[Y | X_A]) / V(Y)`, so `v(∅) = 0` and `v(D) = 1`. The dual game
//! `w(A) = v(D) − v(D∖A)` then holds the total Sobol' indices.

use std::fmt;

use thiserror::Error;

/// Hard cap on the number of inputs a coalition can index.
pub const MAX_PLAYERS: usize = 30;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("player count {0} exceeds the supported maximum of {max}", max = MAX_PLAYERS)]
    TooManyPlayers(usize),
    #[error("value table has {got} entries, expected {expected} for {players} players")]
    WrongTableSize {
        got: usize,
        expected: usize,
        players: usize,
    },
    #[error("the empty coalition must have worth zero, got {0}")]
    NonzeroEmptyWorth(f64),
    #[error("coalition value for mask {mask:#b} is not finite")]
    NonFiniteValue { mask: u32 },
    #[error("player index {0} is out of range for {1} players")]
    PlayerOutOfRange(usize, usize),
}

/// A subset of players (input indices), stored as a bitmask over `0..d`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    mask: u32,
}

impl Coalition {
    /// The empty coalition.
    pub const EMPTY: Coalition = Coalition { mask: 0 };

    /// Builds a coalition from a raw bitmask.
    pub fn from_mask(mask: u32) -> Self {
        Coalition { mask }
    }

    /// Builds a coalition from explicit player indices.
    ///
    /// # Panics
    /// Panics if any index is `>= MAX_PLAYERS`.
    pub fn from_members(members: &[usize]) -> Self {
        let mut mask = 0u32;
        for &i in members {
            assert!(i < MAX_PLAYERS, "player index {i} exceeds {MAX_PLAYERS}");
            mask |= 1 << i;
        }
        Coalition { mask }
    }

    /// The singleton coalition `{player}`.
    pub fn singleton(player: usize) -> Self {
        assert!(player < MAX_PLAYERS, "player index {player} exceeds {MAX_PLAYERS}");
        Coalition { mask: 1 << player }
    }

    /// The grand coalition of all `d` players.
    pub fn full(d: usize) -> Self {
        assert!(d <= MAX_PLAYERS, "player count {d} exceeds {MAX_PLAYERS}");
        if d == 0 {
            Coalition::EMPTY
        } else {
            Coalition {
                mask: (1u32 << d) - 1,
            }
        }
    }

    pub fn mask(self) -> u32 {
        self.mask
    }

    pub fn is_empty(self) -> bool {
        self.mask == 0
    }

    pub fn size(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(self, player: usize) -> bool {
        player < 32 && self.mask & (1 << player) != 0
    }

    pub fn insert(self, player: usize) -> Self {
        assert!(player < MAX_PLAYERS, "player index {player} exceeds {MAX_PLAYERS}");
        Coalition {
            mask: self.mask | (1 << player),
        }
    }

    pub fn union(self, other: Coalition) -> Self {
        Coalition {
            mask: self.mask | other.mask,
        }
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.mask & !other.mask == 0
    }

    /// The complement with respect to the grand coalition of `d` players.
    pub fn complement(self, d: usize) -> Self {
        let full = Coalition::full(d);
        debug_assert!(self.is_subset_of(full), "coalition not within {d} players");
        Coalition {
            mask: full.mask & !self.mask,
        }
    }

    /// Member indices in ascending order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mask = self.mask;
        (0..32usize).filter(move |i| mask & (1 << i) != 0)
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coalition{self}")
    }
}

impl fmt::Display for Coalition {
    /// Renders as `{i,j,...}` with zero-based player indices.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, i) in self.members().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Closed and total Sobol' indices for one coalition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolEstimate {
    pub coalition: Coalition,
    /// Closed index: `V(E[Y | X_A]) / V(Y)`, the game worth of `A`.
    pub closed_index: f64,
    /// Total index: `E[V(Y | X_{−A})] / V(Y)`, the dual worth of `A`.
    pub total_index: f64,
}

/// Result of a game monotonicity audit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotonicityAudit {
    /// Adjacent pairs `(A∖{i}, A)` with `v(A∖{i}) − v(A)` above the tolerance.
    pub violations: usize,
    /// Total number of adjacent pairs checked (`d · 2^(d−1)`).
    pub edges: usize,
    /// Largest observed drop `v(A∖{i}) − v(A)` (0 if none).
    pub worst_drop: f64,
}

impl MonotonicityAudit {
    pub fn violation_fraction(&self) -> f64 {
        if self.edges == 0 {
            0.0
        } else {
            self.violations as f64 / self.edges as f64
        }
    }
}

/// A transferable-utility game: one worth per coalition of `d` players.
#[derive(Clone, Debug, PartialEq)]
pub struct CooperativeGame {
    d: usize,
    values: Vec<f64>,
    estimated: bool,
}

impl CooperativeGame {
    /// Builds a game from a full value table, `values[coalition.mask()]`.
    ///
    /// The table must have `2^d` entries, `values[0]` must be exactly zero, and
    /// every entry must be finite.
    pub fn from_values(d: usize, values: Vec<f64>) -> Result<Self, GameError> {
        Self::build(d, values, false)
    }

    /// Like [`from_values`](Self::from_values) but marks the game as coming
    /// from a statistical estimator (this only changes downstream defaults
    /// such as the zero-detection tolerance).
    pub fn from_estimated_values(d: usize, values: Vec<f64>) -> Result<Self, GameError> {
        Self::build(d, values, true)
    }

    fn build(d: usize, values: Vec<f64>, estimated: bool) -> Result<Self, GameError> {
        if d > MAX_PLAYERS {
            return Err(GameError::TooManyPlayers(d));
        }
        let expected = 1usize << d;
        if values.len() != expected {
            return Err(GameError::WrongTableSize {
                got: values.len(),
                expected,
                players: d,
            });
        }
        if values[0] != 0.0 {
            return Err(GameError::NonzeroEmptyWorth(values[0]));
        }
        if let Some(mask) = values.iter().position(|v| !v.is_finite()) {
            return Err(GameError::NonFiniteValue { mask: mask as u32 });
        }
        Ok(CooperativeGame {
            d,
            values,
            estimated,
        })
    }

    pub fn players(&self) -> usize {
        self.d
    }

    pub fn is_estimated(&self) -> bool {
        self.estimated
    }

    /// Worth of the given coalition.
    pub fn value(&self, c: Coalition) -> f64 {
        self.values[c.mask() as usize]
    }

    /// Worth of the grand coalition.
    pub fn grand_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// The full value table, indexed by coalition mask.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The dual game `w(A) = v(D) − v(D∖A)`.
    ///
    /// For a normalized variance game the dual worth of `A` is the total
    /// Sobol' index of `A`. The dual is an involution and additive games are
    /// self-dual.
    pub fn dual(&self) -> CooperativeGame {
        let full = (self.values.len() - 1) as u32;
        let grand = self.grand_value();
        let values = (0..self.values.len())
            .map(|mask| {
                if mask == 0 {
                    0.0
                } else {
                    grand - self.values[(full & !(mask as u32)) as usize]
                }
            })
            .collect();
        CooperativeGame {
            d: self.d,
            values,
            estimated: self.estimated,
        }
    }

    /// Closed and total Sobol' indices for one coalition of a normalized game.
    pub fn sobol_estimate(&self, c: Coalition) -> Result<SobolEstimate, GameError> {
        if !c.is_subset_of(Coalition::full(self.d)) {
            let extra = c.members().find(|&i| i >= self.d).unwrap_or(self.d);
            return Err(GameError::PlayerOutOfRange(extra, self.d));
        }
        let full = (self.values.len() - 1) as u32;
        let total = self.grand_value() - self.values[(full & !c.mask()) as usize];
        Ok(SobolEstimate {
            coalition: c,
            closed_index: self.value(c),
            total_index: total,
        })
    }

    /// Counts adjacent monotonicity violations `v(A∖{i}) > v(A) + tolerance`.
    ///
    /// Estimated games may violate monotonicity; violations are reported, not
    /// repaired.
    pub fn monotonicity_audit(&self, tolerance: f64) -> MonotonicityAudit {
        let mut violations = 0usize;
        let mut edges = 0usize;
        let mut worst = 0.0f64;
        for mask in 1..self.values.len() {
            let v = self.values[mask];
            let mut bits = mask;
            while bits != 0 {
                let bit = bits & bits.wrapping_neg();
                bits ^= bit;
                edges += 1;
                let drop = self.values[mask ^ bit] - v;
                if drop > tolerance {
                    violations += 1;
                }
                if drop > worst {
                    worst = drop;
                }
            }
        }
        MonotonicityAudit {
            violations,
            edges,
            worst_drop: worst,
        }
    }
}
