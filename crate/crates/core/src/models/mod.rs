//! Synthetic data generators for the estimation pipeline: a CT organ-dose
//! model with realistic input dependence, correlated-Gaussian and Ishigami
//! benchmarks, and a small epidemic-model demo. All generators are pure
//! functions of their seed and emit ordinary [`crate::dataset::Dataset`]s.

pub mod benchmarks;
pub mod copula;
pub mod ncict;
pub mod sir;

use thiserror::Error;

use crate::dataset::DatasetError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("bad correlation matrix: {0}")]
    BadCorrelationMatrix(String),
    #[error("{got} weights for {expected} inputs")]
    WeightCountMismatch { got: usize, expected: usize },
    #[error("invalid scan record: {0}")]
    InvalidScanRecord(String),
    #[error("no table entry for {0}")]
    MissingTableEntry(String),
    #[error("pitch must be positive and finite, got {0}")]
    BadPitch(f64),
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("integration step size underflow (compartments kept going negative)")]
    StepSizeUnderflow,
    #[error("bad dose-table payload: {0}")]
    BadTablePayload(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub use benchmarks::{ishigami_sample, ishigami_total_indices, linear_gaussian_sample};
pub use copula::GaussianCopula;
pub use ncict::{
    ctdi_vol, ncict_sample, organ_dose, phantom_age, synth_dose_tables, DoseTables, ExamClass,
    Filter, Gender, Organ, ScanRecord,
};
pub use sir::{sir_demo_sample, SirOutput};
