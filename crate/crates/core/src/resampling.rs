//! m-out-of-n bootstrap for estimated allocations: subsample without
//! replacement at a fixed fraction, re-estimate per repetition, and report
//! percentile confidence intervals with optional bias correction.
//!
//! The point estimate always comes from the full data; repetitions only feed
//! the intervals and the bias term. Repetition `r` draws its rows with seed
//! `plan.seed ^ r`, so runs are reproducible and repetitions independent.

use thiserror::Error;

use crate::allocations::{allocate, AllocationMethod};
use crate::dataset::{subsample_rows, Dataset};
use crate::estimate::{estimate_games_resampled, EstimateError};
use crate::game::CooperativeGame;

type Source = Box<dyn std::error::Error + Send + Sync + 'static>;

#[derive(Debug, Error)]
pub enum ResamplingError {
    #[error("bootstrap needs at least two repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error("subsample fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
    #[error("quantiles ({0}, {1}) must satisfy 0 < low < high < 1")]
    InvalidQuantiles(f64, f64),
    #[error("no samples to take percentiles of")]
    EmptySamples,
    #[error("share vectors have mismatched lengths")]
    LengthMismatch,
    #[error("full-data estimation failed: {0}")]
    FullData(#[source] Source),
    #[error("repetition {rep} failed: {source}")]
    Repetition {
        rep: usize,
        #[source]
        source: Source,
    },
}

/// Settings of one bootstrap run.
#[derive(Clone, Debug)]
pub struct BootstrapPlan {
    pub repetitions: usize,
    /// Fraction of rows drawn (without replacement) per repetition; 1.0
    /// degenerates to re-running on the full data.
    pub fraction: f64,
    /// (low, high) percentile pair for the intervals.
    pub quantiles: (f64, f64),
    /// Replace the point estimate by `2·full − mean(repetitions)`.
    pub bias_correct: bool,
    /// Shift the interval endpoints along with the corrected estimate
    /// (default: intervals are percentiles of the raw repetition shares).
    pub quantiles_on_corrected: bool,
    pub seed: u64,
}

impl BootstrapPlan {
    pub fn new(repetitions: usize, fraction: f64, quantiles: (f64, f64), seed: u64) -> Self {
        BootstrapPlan {
            repetitions,
            fraction,
            quantiles,
            bias_correct: false,
            quantiles_on_corrected: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ResamplingError> {
        if self.repetitions < 2 {
            return Err(ResamplingError::TooFewRepetitions(self.repetitions));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(ResamplingError::InvalidFraction(self.fraction));
        }
        let (low, high) = self.quantiles;
        if !(low > 0.0 && low < high && high < 1.0) {
            return Err(ResamplingError::InvalidQuantiles(low, high));
        }
        Ok(())
    }
}

/// One input's bootstrap summary.
#[derive(Clone, Copy, Debug)]
pub struct InputInterval {
    /// Point estimate: bias-corrected when the plan says so, else full-data.
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Full bootstrap output for one method: intervals per input, the plan that
/// produced them, and the raw material for audits.
#[derive(Clone, Debug)]
pub struct IntervalReport {
    pub plan: BootstrapPlan,
    pub intervals: Vec<InputInterval>,
    /// Uncorrected full-data point estimate.
    pub raw_estimate: Vec<f64>,
    /// Per-repetition shares, repetition-major.
    pub repetition_shares: Vec<Vec<f64>>,
}

/// Standard bootstrap bias correction: `2·full − repetition mean`.
pub fn bias_correct(full_estimate: &[f64], repetition_mean: &[f64]) -> Vec<f64> {
    assert_eq!(
        full_estimate.len(),
        repetition_mean.len(),
        "bias correction needs vectors of equal length"
    );
    full_estimate
        .iter()
        .zip(repetition_mean)
        .map(|(f, m)| 2.0 * f - m)
        .collect()
}

/// Empirical (low, high) percentiles by the nearest-rank convention:
/// the q-th percentile of m sorted samples is the ⌈q·m⌉-th order statistic.
pub fn percentile_ci(
    samples: &[f64],
    low: f64,
    high: f64,
) -> Result<(f64, f64), ResamplingError> {
    if samples.is_empty() {
        return Err(ResamplingError::EmptySamples);
    }
    if !(low > 0.0 && low < high && high < 1.0) {
        return Err(ResamplingError::InvalidQuantiles(low, high));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let m = sorted.len();
    let rank = |q: f64| ((q * m as f64).ceil() as usize).clamp(1, m) - 1;
    Ok((sorted[rank(low)], sorted[rank(high)]))
}

/// The games a bootstrap run is built on: one from the full data, one per
/// repetition, all estimated under the shared full-data encoding.
#[derive(Debug)]
pub struct BootstrapGames {
    pub full: CooperativeGame,
    pub repetitions: Vec<CooperativeGame>,
}

/// Estimates the full-data game and every repetition's game in one shared
/// pass. This is the expensive step; derive as many methods as needed from
/// the result.
pub fn bootstrap_games(
    ds: &Dataset,
    k: usize,
    epsilon: f64,
    plan: &BootstrapPlan,
) -> Result<BootstrapGames, ResamplingError> {
    plan.validate()?;
    let n = ds.n();
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(plan.repetitions + 1);
    sets.push((0..n).collect());
    for r in 0..plan.repetitions {
        let rows = subsample_rows(n, plan.fraction, plan.seed ^ r as u64)
            .map_err(|e| ResamplingError::Repetition {
                rep: r,
                source: Box::new(e),
            })?;
        sets.push(rows);
    }
    let mut games =
        estimate_games_resampled(ds, k, epsilon, &sets).map_err(attribute_estimate_error)?;
    let full = games.remove(0);
    Ok(BootstrapGames {
        full,
        repetitions: games,
    })
}

fn attribute_estimate_error(e: EstimateError) -> ResamplingError {
    match e {
        EstimateError::RowSet { index: 0, source } => ResamplingError::FullData(source),
        EstimateError::RowSet { index, source } => ResamplingError::Repetition {
            rep: index - 1,
            source,
        },
        other => ResamplingError::FullData(Box::new(other)),
    }
}

/// Assembles an [`IntervalReport`] from a full-data share vector and the
/// repetition share vectors, applying the plan's bias and quantile choices.
pub fn share_report(
    plan: &BootstrapPlan,
    full_shares: &[f64],
    repetition_shares: Vec<Vec<f64>>,
) -> Result<IntervalReport, ResamplingError> {
    let d = full_shares.len();
    if repetition_shares.iter().any(|r| r.len() != d) {
        return Err(ResamplingError::LengthMismatch);
    }
    if repetition_shares.is_empty() {
        return Err(ResamplingError::EmptySamples);
    }
    let reps = repetition_shares.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|i| repetition_shares.iter().map(|r| r[i]).sum::<f64>() / reps)
        .collect();
    let corrected = if plan.bias_correct {
        bias_correct(full_shares, &mean)
    } else {
        full_shares.to_vec()
    };
    let (low, high) = plan.quantiles;
    let mut intervals = Vec::with_capacity(d);
    for i in 0..d {
        let shift = if plan.quantiles_on_corrected {
            corrected[i] - mean[i]
        } else {
            0.0
        };
        let samples: Vec<f64> = repetition_shares.iter().map(|r| r[i] + shift).collect();
        let (ci_low, ci_high) = percentile_ci(&samples, low, high)?;
        intervals.push(InputInterval {
            estimate: corrected[i],
            ci_low,
            ci_high,
        });
    }
    Ok(IntervalReport {
        plan: plan.clone(),
        intervals,
        raw_estimate: full_shares.to_vec(),
        repetition_shares,
    })
}

/// End-to-end bootstrap of one allocation method: estimate games, allocate
/// per repetition, summarize. Shares are reported as the method produces
/// them (no renormalization).
pub fn bootstrap_allocations(
    ds: &Dataset,
    method: AllocationMethod,
    plan: &BootstrapPlan,
    k: usize,
    epsilon: f64,
) -> Result<IntervalReport, ResamplingError> {
    let games = bootstrap_games(ds, k, epsilon, plan)?;
    let full_shares = allocate(&games.full, method)
        .map_err(|e| ResamplingError::FullData(Box::new(e)))?
        .shares;
    let repetition_shares = games
        .repetitions
        .iter()
        .enumerate()
        .map(|(rep, game)| {
            allocate(game, method)
                .map(|a| a.shares)
                .map_err(|e| ResamplingError::Repetition {
                    rep,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>, ResamplingError>>()?;
    share_report(plan, &full_shares, repetition_shares)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::DiscreteModel;

    fn demo_plan() -> BootstrapPlan {
        BootstrapPlan::new(10, 0.8, (0.05, 0.95), 7)
    }

    #[test]
    fn plan_validation() {
        assert!(demo_plan().validate().is_ok());
        let mut p = demo_plan();
        p.repetitions = 1;
        assert!(matches!(
            p.validate(),
            Err(ResamplingError::TooFewRepetitions(1))
        ));
        let mut p = demo_plan();
        p.fraction = 0.0;
        assert!(matches!(p.validate(), Err(ResamplingError::InvalidFraction(_))));
        let mut p = demo_plan();
        p.fraction = 1.2;
        assert!(matches!(p.validate(), Err(ResamplingError::InvalidFraction(_))));
        let mut p = demo_plan();
        p.quantiles = (0.95, 0.05);
        assert!(matches!(
            p.validate(),
            Err(ResamplingError::InvalidQuantiles(_, _))
        ));
    }

    #[test]
    fn bias_correct_examples() {
        assert!((bias_correct(&[0.30], &[0.27])[0] - 0.33).abs() < 1e-15);
        assert!((bias_correct(&[0.10], &[0.14])[0] - 0.06).abs() < 1e-15);
        // Zero observed bias leaves the estimate alone.
        assert_eq!(bias_correct(&[0.5], &[0.5]), vec![0.5]);
    }

    #[test]
    fn percentile_nearest_rank() {
        let grid: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(percentile_ci(&grid, 0.05, 0.95).unwrap(), (5.0, 95.0));
        assert_eq!(percentile_ci(&[3.0; 9], 0.1, 0.9).unwrap(), (3.0, 3.0));
        assert_eq!(percentile_ci(&[2.5], 0.05, 0.95).unwrap(), (2.5, 2.5));
        assert!(matches!(
            percentile_ci(&[], 0.05, 0.95),
            Err(ResamplingError::EmptySamples)
        ));
        assert!(matches!(
            percentile_ci(&[1.0], 0.95, 0.05),
            Err(ResamplingError::InvalidQuantiles(_, _))
        ));
    }

    #[test]
    fn share_report_orders_intervals_and_corrects_bias() {
        let mut plan = demo_plan();
        plan.bias_correct = true;
        let reps: Vec<Vec<f64>> = (0..10).map(|r| vec![0.2 + 0.01 * r as f64]).collect();
        // Repetition mean is 0.245; full estimate 0.3 → corrected 0.355.
        let report = share_report(&plan, &[0.3], reps).unwrap();
        let iv = &report.intervals[0];
        assert!((iv.estimate - 0.355).abs() < 1e-12);
        assert!(iv.ci_low <= iv.ci_high);
        assert_eq!(report.raw_estimate, vec![0.3]);
        // Raw-quantile default: interval brackets the repetition range.
        assert!((iv.ci_low - 0.20).abs() < 1e-12);
        assert!((iv.ci_high - 0.29).abs() < 1e-12);
    }

    #[test]
    fn share_report_can_shift_quantiles_with_the_correction() {
        let mut plan = demo_plan();
        plan.bias_correct = true;
        plan.quantiles_on_corrected = true;
        let reps: Vec<Vec<f64>> = (0..10).map(|r| vec![0.2 + 0.01 * r as f64]).collect();
        let report = share_report(&plan, &[0.3], reps).unwrap();
        let iv = &report.intervals[0];
        let shift = 0.355 - 0.245;
        assert!((iv.ci_low - (0.20 + shift)).abs() < 1e-12);
        assert!((iv.ci_high - (0.29 + shift)).abs() < 1e-12);
    }

    #[test]
    fn share_report_rejects_ragged_input() {
        let plan = demo_plan();
        assert!(matches!(
            share_report(&plan, &[0.3, 0.7], vec![vec![0.3]]),
            Err(ResamplingError::LengthMismatch)
        ));
        assert!(matches!(
            share_report(&plan, &[0.3], Vec::new()),
            Err(ResamplingError::EmptySamples)
        ));
    }

    fn correlated_bits_dataset(n: usize, seed: u64) -> Dataset {
        let p = 0.8;
        let model = DiscreteModel::new(
            vec![2, 2],
            vec![p / 2.0, (1.0 - p) / 2.0, (1.0 - p) / 2.0, p / 2.0],
            vec![0.0, 0.0, 1.0, 1.0],
        )
        .unwrap();
        model.sample(n, seed).unwrap()
    }

    #[test]
    fn full_fraction_gives_zero_width_intervals() {
        let ds = correlated_bits_dataset(800, 3);
        let mut plan = BootstrapPlan::new(5, 1.0, (0.05, 0.95), 11);
        plan.bias_correct = true;
        let report =
            bootstrap_allocations(&ds, AllocationMethod::Shapley, &plan, 5, 0.0).unwrap();
        for (i, iv) in report.intervals.iter().enumerate() {
            assert_eq!(iv.ci_low, iv.ci_high, "input {i}");
            assert_eq!(iv.ci_low, report.raw_estimate[i]);
            // All repetitions identical → zero bias → corrected = full.
            assert_eq!(iv.estimate, report.raw_estimate[i]);
        }
        for rep in &report.repetition_shares {
            assert_eq!(rep, &report.raw_estimate);
        }
    }

    #[test]
    fn bootstrap_is_deterministic_and_brackets_the_estimate() {
        let ds = correlated_bits_dataset(600, 9);
        let plan = BootstrapPlan::new(20, 0.8, (0.05, 0.95), 42);
        let a = bootstrap_allocations(&ds, AllocationMethod::Shapley, &plan, 5, 0.0).unwrap();
        let b = bootstrap_allocations(&ds, AllocationMethod::Shapley, &plan, 5, 0.0).unwrap();
        for (x, y) in a.intervals.iter().zip(&b.intervals) {
            assert_eq!(x.estimate, y.estimate);
            assert_eq!(x.ci_low, y.ci_low);
            assert_eq!(x.ci_high, y.ci_high);
        }
        assert_eq!(a.repetition_shares, b.repetition_shares);
        for iv in &a.intervals {
            assert!(iv.ci_low <= iv.ci_high);
        }
        // Shapley shares of this 2-input game sum to 1 per repetition.
        for rep in &a.repetition_shares {
            assert!((rep.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn repetition_failures_carry_the_index() {
        let ds = correlated_bits_dataset(100, 5);
        // k exceeds every subsample's size → the first repetition fails.
        let plan = BootstrapPlan::new(3, 0.5, (0.05, 0.95), 1);
        let err = bootstrap_allocations(&ds, AllocationMethod::Shapley, &plan, 60, 0.0)
            .unwrap_err();
        match err {
            ResamplingError::Repetition { rep, .. } => assert_eq!(rep, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
