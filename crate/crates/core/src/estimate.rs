//! Given-data estimation of the variance cooperative game.
//!
//! For a subset `S` the conditional-variance ratio
//! `E[V(Y | X_S)] / V(Y)` is estimated by averaging, over all rows, the output
//! variance within each row's k-nearest neighborhood in the encoded `S`
//! subspace. The game worth is its complement-free form
//! `v̂(S) = 1 − ratio(S)`, with `v̂(∅) = 0` and `v̂(D) = 1` pinned exactly.
//!
//! Rows that coincide exactly in the encoded subspace (ubiquitous with
//! discrete inputs) have identical neighborhoods, so they are grouped: a
//! duplicate group with at least `k` members is its own neighborhood, and a
//! smaller group shares one kNN query. On continuous data every group has one
//! row and this is plain self-inclusive kNN.
//!
//! [`exact_game_discrete`] computes the same game in closed form for a finite
//! discrete distribution, as an oracle for the estimator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{
    encode, variance_total, ColumnData, ColumnKind, ColumnSpec, Dataset, DatasetError,
};
use crate::game::{Coalition, CooperativeGame, GameError};
use crate::neighbors::{brute_knn_rows, Neighbor, NeighborError, NeighborIndex};

/// Enumeration guard: estimating a game touches `2^d` coalitions.
pub const MAX_ESTIMATED_INPUTS: usize = 20;

/// Cap on the joint support size of [`DiscreteModel`].
pub const MAX_ATOMS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Neighbors(#[from] NeighborError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("{d} inputs exceed the game-estimation maximum of {max}", max = MAX_ESTIMATED_INPUTS)]
    TooManyInputs { d: usize },
    #[error("neighborhood size k = {k} out of range: must be between 2 and n = {n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("approximation factor epsilon must be finite and >= 0, got {0}")]
    InvalidEpsilon(f64),
    #[error("discrete model: {0}")]
    InvalidDiscreteModel(String),
    #[error("discrete model has {atoms} atoms, more than the maximum {max}", max = MAX_ATOMS)]
    AtomCountOverflow { atoms: usize },
    #[error("degenerate output: variance is zero")]
    DegenerateOutput,
    #[error("row set {index}: {source}")]
    RowSet {
        index: usize,
        source: Box<EstimateError>,
    },
}

/// Per-input dense value identifiers for exact-duplicate grouping.
///
/// `None` marks an input that carries no distance information (constant after
/// encoding), which therefore must not split duplicate groups.
struct InputIds {
    ids: Option<Vec<u32>>,
    bits: u32,
}

struct GameEstimator<'a> {
    ds: &'a Dataset,
    k: usize,
    epsilon: f64,
    var_y: f64,
    ids: Vec<InputIds>,
}

impl<'a> GameEstimator<'a> {
    fn new(ds: &'a Dataset, k: usize, epsilon: f64) -> Result<Self, EstimateError> {
        let n = ds.n();
        if k < 2 || k > n {
            return Err(EstimateError::KOutOfRange { k, n });
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(EstimateError::InvalidEpsilon(epsilon));
        }
        let var_y = variance_total(ds).map_err(|e| match e {
            DatasetError::DegenerateOutput => EstimateError::DegenerateOutput,
            other => EstimateError::Dataset(other),
        })?;

        // Inputs whose encoded columns all collapse to constants are invisible
        // to the subspace metric; detect them once on the full encoding.
        let enc_full = encode(ds, Coalition::full(ds.d()))?;
        let mut visible = vec![false; ds.d()];
        for col in enc_full.columns() {
            visible[col.input] = true;
        }

        let ids = (0..ds.d())
            .map(|i| {
                if !visible[i] {
                    return InputIds { ids: None, bits: 0 };
                }
                let (ids, distinct) = dense_ids(ds.input(i));
                if distinct <= 1 {
                    return InputIds { ids: None, bits: 0 };
                }
                let bits = u32::BITS - (distinct as u32 - 1).leading_zeros();
                InputIds {
                    ids: Some(ids),
                    bits,
                }
            })
            .collect();

        Ok(GameEstimator {
            ds,
            k,
            epsilon,
            var_y,
            ids,
        })
    }

    /// Rows sorted so that exact duplicates in the subset's encoded subspace
    /// are adjacent (and ascending within a run), plus the run boundaries.
    fn grouped_runs(&self, subset: Coalition) -> (Vec<u32>, Vec<(u32, u32)>) {
        let n = self.ds.n();
        let active: Vec<&Vec<u32>> = subset
            .members()
            .filter_map(|i| self.ids[i].ids.as_ref())
            .collect();
        if active.is_empty() {
            return (
                (0..n as u32).collect(),
                vec![(0, n as u32)],
            );
        }
        let total_bits: u32 = subset
            .members()
            .map(|i| if self.ids[i].ids.is_some() { self.ids[i].bits } else { 0 })
            .sum();

        let mut order: Vec<u32>;
        let runs;
        if total_bits <= 128 {
            let mut keyed: Vec<(u128, u32)> = (0..n as u32)
                .map(|row| {
                    let mut key = 0u128;
                    for i in subset.members() {
                        if let Some(ids) = &self.ids[i].ids {
                            key = (key << self.ids[i].bits) | ids[row as usize] as u128;
                        }
                    }
                    (key, row)
                })
                .collect();
            keyed.sort_unstable();
            order = Vec::with_capacity(n);
            let mut bounds = Vec::new();
            let mut start = 0u32;
            for (pos, (key, row)) in keyed.iter().enumerate() {
                if pos > 0 && *key != keyed[pos - 1].0 {
                    bounds.push((start, pos as u32));
                    start = pos as u32;
                }
                order.push(*row);
            }
            bounds.push((start, n as u32));
            runs = bounds;
        } else {
            order = (0..n as u32).collect();
            order.sort_unstable_by(|&a, &b| {
                for ids in &active {
                    let c = ids[a as usize].cmp(&ids[b as usize]);
                    if c != std::cmp::Ordering::Equal {
                        return c;
                    }
                }
                a.cmp(&b)
            });
            let mut bounds = Vec::new();
            let mut start = 0u32;
            for pos in 1..n {
                let same = active
                    .iter()
                    .all(|ids| ids[order[pos] as usize] == ids[order[pos - 1] as usize]);
                if !same {
                    bounds.push((start, pos as u32));
                    start = pos as u32;
                }
            }
            bounds.push((start, n as u32));
            runs = bounds;
        }
        (order, runs)
    }

    /// Estimates `E[V(Y | X_subset)] / V(Y)`.
    fn conditional_variance_ratio(&self, subset: Coalition) -> Result<f64, EstimateError> {
        let enc = encode(self.ds, subset)?;
        if enc.m() == 0 {
            // The subspace carries no information: V(Y | const) = V(Y).
            return Ok(1.0);
        }
        let (order, runs) = self.grouped_runs(subset);
        let need_tree = runs.iter().any(|(s, e)| ((e - s) as usize) < self.k);
        let index = if need_tree {
            Some(NeighborIndex::build(&enc, self.epsilon)?)
        } else {
            None
        };
        let y = self.ds.output();
        let mut acc = 0.0f64;
        for &(start, end) in &runs {
            let rows = &order[start as usize..end as usize];
            let var = if rows.len() >= self.k {
                variance_of_rows(y, rows)
            } else {
                let neighbors = index
                    .as_ref()
                    .expect("tree built when any run is short")
                    .knn(enc.point(rows[0] as usize), self.k, false)?;
                variance_of_neighbors(y, &neighbors)
            };
            acc += var * rows.len() as f64;
        }
        Ok(acc / self.ds.n() as f64 / self.var_y)
    }
}

fn dense_ids(column: &ColumnData) -> (Vec<u32>, usize) {
    let n = column.len();
    match column {
        ColumnData::Categorical(codes) => {
            let distinct = codes.iter().copied().max().unwrap_or(0) as usize + 1;
            (codes.clone(), distinct)
        }
        ColumnData::Integer(values) => rank_ids(n, |a, b| values[a].cmp(&values[b]), |a, b| {
            values[a] == values[b]
        }),
        ColumnData::Numeric(values) => rank_ids(
            n,
            |a, b| values[a].total_cmp(&values[b]),
            |a, b| values[a] == values[b],
        ),
    }
}

fn rank_ids(
    n: usize,
    cmp: impl Fn(usize, usize) -> std::cmp::Ordering,
    eq: impl Fn(usize, usize) -> bool,
) -> (Vec<u32>, usize) {
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&a, &b| cmp(a as usize, b as usize));
    let mut ids = vec![0u32; n];
    let mut rank = 0u32;
    for pos in 0..n {
        if pos > 0 && !eq(order[pos] as usize, order[pos - 1] as usize) {
            rank += 1;
        }
        ids[order[pos] as usize] = rank;
    }
    (ids, rank as usize + 1)
}

/// Sample variance (len−1 denominator) of `y` over the given rows.
fn variance_of_rows(y: &[f64], rows: &[u32]) -> f64 {
    debug_assert!(rows.len() >= 2);
    let len = rows.len() as f64;
    let mean = rows.iter().map(|&r| y[r as usize]).sum::<f64>() / len;
    rows.iter()
        .map(|&r| {
            let d = y[r as usize] - mean;
            d * d
        })
        .sum::<f64>()
        / (len - 1.0)
}

fn variance_of_neighbors(y: &[f64], neighbors: &[Neighbor]) -> f64 {
    debug_assert!(neighbors.len() >= 2);
    let len = neighbors.len() as f64;
    let mean = neighbors.iter().map(|nb| y[nb.row]).sum::<f64>() / len;
    neighbors
        .iter()
        .map(|nb| {
            let d = y[nb.row] - mean;
            d * d
        })
        .sum::<f64>()
        / (len - 1.0)
}

/// Estimates the total Sobol' index `E[V(Y | X_{D∖A})] / V(Y)` of coalition
/// `a` by k-nearest-neighbor conditioning on the complementary subspace.
///
/// `a = D` returns exactly 1 and `a = ∅` exactly 0 (no kNN involved), keeping
/// the op consistent with the dual of an estimated game.
pub fn total_sobol_knn(
    ds: &Dataset,
    a: Coalition,
    k: usize,
    epsilon: f64,
) -> Result<f64, EstimateError> {
    let d = ds.d();
    if let Some(bad) = a.members().find(|&i| i >= d) {
        return Err(EstimateError::Dataset(DatasetError::SubsetOutOfRange(bad, d)));
    }
    let estimator = GameEstimator::new(ds, k, epsilon)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    if a == Coalition::full(d) {
        return Ok(1.0);
    }
    estimator.conditional_variance_ratio(a.complement(d))
}

/// Estimates the full variance game: `v̂(A) = 1 − E[V(Y | X_A)]/V(Y)` for
/// every coalition, with `v̂(∅) = 0` and `v̂(D) = 1` pinned exactly.
///
/// Coalitions are estimated independently (in parallel); results are
/// deterministic for a fixed dataset regardless of thread count.
pub fn estimate_game(
    ds: &Dataset,
    k: usize,
    epsilon: f64,
) -> Result<CooperativeGame, EstimateError> {
    let d = ds.d();
    if d > MAX_ESTIMATED_INPUTS {
        return Err(EstimateError::TooManyInputs { d });
    }
    let estimator = GameEstimator::new(ds, k, epsilon)?;
    let full = (1u32 << d) - 1;
    let mut values = vec![0.0f64; 1 << d];
    values[full as usize] = 1.0;
    let interior: Vec<u32> = (1..full).collect();
    let estimates = interior
        .par_iter()
        .map(|&mask| {
            estimator
                .conditional_variance_ratio(Coalition::from_mask(mask))
                .map(|ratio| 1.0 - ratio)
        })
        .collect::<Result<Vec<f64>, EstimateError>>()?;
    for (&mask, v) in interior.iter().zip(estimates) {
        values[mask as usize] = v;
    }
    Ok(CooperativeGame::from_estimated_values(d, values)?)
}

/// One row subset the resampled estimator evaluates a game on.
struct RepSet {
    rows: Vec<u32>,
    /// Membership bitmask over the original rows.
    mask: Vec<u64>,
    var_y: f64,
}

impl RepSet {
    #[inline]
    fn contains(&self, row: u32) -> bool {
        self.mask[(row >> 6) as usize] & (1u64 << (row & 63)) != 0
    }
}

fn build_rep_set(ds: &Dataset, rows: &[usize], k: usize) -> Result<RepSet, EstimateError> {
    let n = ds.n();
    if rows.len() < k {
        return Err(EstimateError::KOutOfRange { k, n: rows.len() });
    }
    for (i, &r) in rows.iter().enumerate() {
        if r >= n || (i > 0 && rows[i - 1] >= r) {
            return Err(EstimateError::Dataset(DatasetError::BadRowSelection { n }));
        }
    }
    let mut mask = vec![0u64; n.div_ceil(64)];
    for &r in rows {
        mask[r >> 6] |= 1u64 << (r & 63);
    }
    let y = ds.output();
    let len = rows.len() as f64;
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / len;
    let var_y = rows
        .iter()
        .map(|&r| {
            let d = y[r] - mean;
            d * d
        })
        .sum::<f64>()
        / (len - 1.0);
    if var_y <= 0.0 || !var_y.is_finite() {
        return Err(EstimateError::DegenerateOutput);
    }
    Ok(RepSet {
        rows: rows.iter().map(|&r| r as u32).collect(),
        mask,
        var_y,
    })
}

impl<'a> GameEstimator<'a> {
    /// Conditional-variance ratios of `subset` for every row set at once,
    /// sharing one full-data pass of kNN work.
    ///
    /// Duplicate groups shorter than `list_len` get one full-data neighbor
    /// list; a row set's k-neighborhood is then the first k list entries that
    /// belong to the set, which is exactly the k nearest rows within the set
    /// whenever the list holds at least k of its members (distances are
    /// sorted, so later members can only be farther). Exhausted lists — and
    /// groups that thinned below k without one — fall back to a direct scan.
    fn ratios_for_sets(
        &self,
        subset: Coalition,
        reps: &[RepSet],
        list_len: usize,
    ) -> Result<Vec<f64>, EstimateError> {
        let enc = encode(self.ds, subset)?;
        if enc.m() == 0 {
            return Ok(vec![1.0; reps.len()]);
        }
        let (order, runs) = self.grouped_runs(subset);
        let k = self.k;
        let need_index = runs.iter().any(|&(s, e)| ((e - s) as usize) < list_len);
        let index = if need_index {
            Some(NeighborIndex::build(&enc, self.epsilon)?)
        } else {
            None
        };
        let lists: Vec<Option<Vec<u32>>> = runs
            .iter()
            .map(|&(s, e)| {
                if ((e - s) as usize) < list_len {
                    let query = enc.point(order[s as usize] as usize);
                    let found = index
                        .as_ref()
                        .expect("index built when any run is short")
                        .knn(query, list_len, false)?;
                    Ok(Some(found.into_iter().map(|nb| nb.row as u32).collect()))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_, EstimateError>>()?;

        let y = self.ds.output();
        let mut ratios = Vec::with_capacity(reps.len());
        let mut ybuf: Vec<f64> = Vec::with_capacity(k);
        for rep in reps {
            let mut acc = 0.0f64;
            for (run_idx, &(s, e)) in runs.iter().enumerate() {
                let members = &order[s as usize..e as usize];
                let mut cnt = 0usize;
                for &r in members {
                    if rep.contains(r) {
                        cnt += 1;
                    }
                }
                if cnt == 0 {
                    continue;
                }
                let var = if cnt >= k {
                    variance_of_present(y, members, rep, cnt)
                } else {
                    ybuf.clear();
                    if let Some(list) = &lists[run_idx] {
                        for &r in list {
                            if rep.contains(r) {
                                ybuf.push(y[r as usize]);
                                if ybuf.len() == k {
                                    break;
                                }
                            }
                        }
                    }
                    if ybuf.len() < k {
                        let query = enc.point(members[0] as usize);
                        let found = brute_knn_rows(&enc, query, k, &rep.rows)?;
                        ybuf.clear();
                        ybuf.extend(found.iter().map(|nb| y[nb.row]));
                    }
                    variance_of_slice(&ybuf)
                };
                acc += var * cnt as f64;
            }
            ratios.push(acc / rep.rows.len() as f64 / rep.var_y);
        }
        Ok(ratios)
    }
}

fn variance_of_present(y: &[f64], members: &[u32], rep: &RepSet, cnt: usize) -> f64 {
    debug_assert!(cnt >= 2);
    let len = cnt as f64;
    let mut sum = 0.0f64;
    for &r in members {
        if rep.contains(r) {
            sum += y[r as usize];
        }
    }
    let mean = sum / len;
    let mut sq = 0.0f64;
    for &r in members {
        if rep.contains(r) {
            let d = y[r as usize] - mean;
            sq += d * d;
        }
    }
    sq / (len - 1.0)
}

fn variance_of_slice(values: &[f64]) -> f64 {
    debug_assert!(values.len() >= 2);
    let len = values.len() as f64;
    let mean = values.iter().sum::<f64>() / len;
    values
        .iter()
        .map(|v| {
            let d = v - mean;
            d * d
        })
        .sum::<f64>()
        / (len - 1.0)
}

/// Estimates one game per row set, sharing the per-coalition encoding,
/// duplicate grouping, and kNN structure across all sets.
///
/// Every row set is evaluated in the FULL dataset's encoding: column
/// standardization is computed once from all rows, so each repetition sees
/// the same metric. (Re-standardizing per subset — what running
/// [`estimate_game`] on an extracted subset would do — perturbs the distance
/// geometry a little on every repetition and folds preprocessing jitter into
/// the resampling variation.) Under that fixed encoding each returned game is
/// exactly the restricted estimator at ε = 0: for a group's query, the first
/// k list entries belonging to the set ARE its k nearest members, and any
/// shortfall is rescanned directly. This is the engine for subsample
/// bootstrapping, where evaluating hundreds of near-identical row sets
/// independently would repeat almost all of the kNN work.
pub fn estimate_games_resampled(
    ds: &Dataset,
    k: usize,
    epsilon: f64,
    row_sets: &[Vec<usize>],
) -> Result<Vec<CooperativeGame>, EstimateError> {
    let d = ds.d();
    if d > MAX_ESTIMATED_INPUTS {
        return Err(EstimateError::TooManyInputs { d });
    }
    let estimator = GameEstimator::new(ds, k, epsilon)?;
    let reps = row_sets
        .iter()
        .enumerate()
        .map(|(index, rows)| {
            build_rep_set(ds, rows, k).map_err(|source| EstimateError::RowSet {
                index,
                source: Box::new(source),
            })
        })
        .collect::<Result<Vec<RepSet>, EstimateError>>()?;
    // Long enough that a run straddling k keeps ≥ k members after typical
    // thinning; shortfalls are caught and rescanned exactly.
    let list_len = (k + k / 2 + 16).min(ds.n());

    let full = (1u32 << d) - 1;
    let interior: Vec<u32> = (1..full).collect();
    let per_mask = interior
        .par_iter()
        .map(|&mask| estimator.ratios_for_sets(Coalition::from_mask(mask), &reps, list_len))
        .collect::<Result<Vec<Vec<f64>>, EstimateError>>()?;

    let mut games = Vec::with_capacity(reps.len());
    for rep_idx in 0..reps.len() {
        let mut values = vec![0.0f64; 1usize << d];
        values[full as usize] = 1.0;
        for (mask_idx, &mask) in interior.iter().enumerate() {
            values[mask as usize] = 1.0 - per_mask[mask_idx][rep_idx];
        }
        games.push(CooperativeGame::from_estimated_values(d, values)?);
    }
    Ok(games)
}

/// A fully specified distribution over a finite grid of integer-coded inputs,
/// with a deterministic output per atom. Atom index runs row-major with the
/// last input fastest.
#[derive(Clone, Debug)]
pub struct DiscreteModel {
    levels: Vec<usize>,
    probs: Vec<f64>,
    outputs: Vec<f64>,
}

impl DiscreteModel {
    pub fn new(
        levels: Vec<usize>,
        probs: Vec<f64>,
        outputs: Vec<f64>,
    ) -> Result<Self, EstimateError> {
        if levels.is_empty() {
            return Err(EstimateError::InvalidDiscreteModel(
                "no inputs declared".into(),
            ));
        }
        if levels.len() > MAX_ESTIMATED_INPUTS {
            return Err(EstimateError::TooManyInputs { d: levels.len() });
        }
        if levels.iter().any(|&l| l == 0) {
            return Err(EstimateError::InvalidDiscreteModel(
                "every input needs at least one level".into(),
            ));
        }
        let atoms = levels.iter().try_fold(1usize, |acc, &l| {
            acc.checked_mul(l).filter(|&a| a <= MAX_ATOMS)
        });
        let Some(atoms) = atoms else {
            let approx = levels.iter().map(|&l| l as f64).product::<f64>();
            return Err(EstimateError::AtomCountOverflow {
                atoms: approx as usize,
            });
        };
        if probs.len() != atoms {
            return Err(EstimateError::InvalidDiscreteModel(format!(
                "{} probabilities for {atoms} atoms",
                probs.len()
            )));
        }
        if outputs.len() != atoms {
            return Err(EstimateError::InvalidDiscreteModel(format!(
                "{} outputs for {atoms} atoms",
                outputs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(EstimateError::InvalidDiscreteModel(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        if outputs.iter().any(|y| !y.is_finite()) {
            return Err(EstimateError::InvalidDiscreteModel(
                "outputs must be finite".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(EstimateError::InvalidDiscreteModel(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let probs = probs.iter().map(|p| p / total).collect();
        Ok(DiscreteModel {
            levels,
            probs,
            outputs,
        })
    }

    pub fn d(&self) -> usize {
        self.levels.len()
    }

    pub fn atoms(&self) -> usize {
        self.probs.len()
    }

    fn strides(&self) -> Vec<usize> {
        let d = self.levels.len();
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.levels[i + 1];
        }
        strides
    }

    /// Draws `n` i.i.d. rows from the joint distribution.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset, EstimateError> {
        if n < 2 {
            return Err(EstimateError::Dataset(DatasetError::TooFewRows));
        }
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0f64;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let strides = self.strides();
        let d = self.d();
        let mut columns: Vec<Vec<i64>> = vec![Vec::with_capacity(n); d];
        let mut output = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen();
            let atom = cdf.partition_point(|c| *c <= u).min(self.atoms() - 1);
            for i in 0..d {
                columns[i].push(((atom / strides[i]) % self.levels[i]) as i64);
            }
            output.push(self.outputs[atom]);
        }
        let specs = (0..d)
            .map(|i| {
                ColumnSpec::input(
                    &format!("x{}", i + 1),
                    ColumnKind::integer_range(0, self.levels[i] as i64 - 1),
                )
            })
            .collect();
        let inputs = columns.into_iter().map(ColumnData::Integer).collect();
        Ok(Dataset::from_parts(specs, inputs, "y", output)?)
    }
}

/// Closed-form variance game of a [`DiscreteModel`]:
/// `v(A) = V(E[Y | X_A]) / V(Y)` computed by exact enumeration of the joint
/// distribution.
pub fn exact_game_discrete(model: &DiscreteModel) -> Result<CooperativeGame, EstimateError> {
    let d = model.d();
    let atoms = model.atoms();
    let strides = model.strides();

    let mu: f64 = model
        .probs
        .iter()
        .zip(&model.outputs)
        .map(|(p, y)| p * y)
        .sum();
    let var_y: f64 = model
        .probs
        .iter()
        .zip(&model.outputs)
        .map(|(p, y)| p * (y - mu) * (y - mu))
        .sum();
    if var_y <= 0.0 {
        return Err(EstimateError::DegenerateOutput);
    }

    let masks: Vec<u32> = (0..(1u32 << d)).collect();
    let mut values = masks
        .par_iter()
        .map(|&mask| {
            let subset = Coalition::from_mask(mask);
            // Projected index strides for the subset grid.
            let mut proj_size = 1usize;
            let mut proj: Vec<(usize, usize, usize)> = Vec::new(); // (stride_in, levels, stride_out)
            for i in subset.members() {
                proj.push((strides[i], model.levels[i], proj_size));
                proj_size *= model.levels[i];
            }
            let mut weight = vec![0.0f64; proj_size];
            let mut weighted_y = vec![0.0f64; proj_size];
            for atom in 0..atoms {
                let p = model.probs[atom];
                let mut cell = 0usize;
                for &(stride_in, levels, stride_out) in &proj {
                    cell += ((atom / stride_in) % levels) * stride_out;
                }
                weight[cell] += p;
                weighted_y[cell] += p * model.outputs[atom];
            }
            let mut between = 0.0f64;
            for cell in 0..proj_size {
                if weight[cell] > 0.0 {
                    let m = weighted_y[cell] / weight[cell];
                    between += weight[cell] * (m - mu) * (m - mu);
                }
            }
            between / var_y
        })
        .collect::<Vec<f64>>();
    // Identities of the definition, pinned against accumulation dust: the
    // trivial partition has no between-cell variance, and conditioning on
    // every input reproduces Y atom by atom.
    values[0] = 0.0;
    values[(1usize << d) - 1] = 1.0;

    Ok(CooperativeGame::from_values(d, values)?)
}
