//! Given-data, variance-based global sensitivity analysis with dependent,
//! mixed-type inputs.
//!
//! The pipeline: a [`dataset::Dataset`] holds the sample; [`estimate`] turns
//! it into a [`game::CooperativeGame`] of normalized explained variances via
//! nearest-neighbor conditional-variance estimation ([`neighbors`]);
//! [`allocations`] distributes the total variance onto individual inputs
//! (Shapley effects and proportional marginal effects); [`resampling`] wraps
//! the whole chain in a subsample bootstrap for confidence intervals.
//! [`models`] provides synthetic data generators (an organ-dose model for CT
//! examinations and standard benchmarks) and [`oracle`] holds deliberately
//! naive reference implementations used to validate the fast paths.

pub mod allocations;
pub mod dataset;
pub mod estimate;
pub mod game;
pub mod models;
pub mod neighbors;
pub mod oracle;
pub mod resampling;
