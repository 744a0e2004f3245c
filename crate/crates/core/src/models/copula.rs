//! Gaussian copula: correlated uniforms from a latent multivariate normal.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use super::ModelError;

/// Validates a correlation matrix (square, symmetric, unit diagonal) and
/// returns its lower Cholesky factor, row-major. Fails on non-PD input.
pub fn cholesky_correlation(correlation: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    let d = correlation.len();
    if d == 0 {
        return Err(ModelError::BadCorrelationMatrix("empty matrix".into()));
    }
    for (i, row) in correlation.iter().enumerate() {
        if row.len() != d {
            return Err(ModelError::BadCorrelationMatrix(format!(
                "row {i} has {} entries, expected {d}",
                row.len()
            )));
        }
        if (row[i] - 1.0).abs() > 1e-12 {
            return Err(ModelError::BadCorrelationMatrix(format!(
                "diagonal entry ({i},{i}) is {}, expected 1",
                row[i]
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::BadCorrelationMatrix(format!(
                    "entry ({i},{j}) is not finite"
                )));
            }
            if (v - correlation[j][i]).abs() > 1e-12 {
                return Err(ModelError::BadCorrelationMatrix(format!(
                    "asymmetric at ({i},{j})"
                )));
            }
        }
    }
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = correlation[i][j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= 1e-12 {
                    return Err(ModelError::NotPositiveDefinite);
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Samples vectors of dependent uniforms whose latent normals carry a given
/// correlation matrix. Marginals are exactly U(0,1); the uniforms inherit the
/// latent dependence monotonically (Pearson correlations of transformed
/// marginals land near, not exactly at, the latent values).
pub struct GaussianCopula {
    d: usize,
    chol: Vec<f64>,
    rng: ChaCha8Rng,
    std_normal: Normal,
}

impl GaussianCopula {
    pub fn new(correlation: &[Vec<f64>], seed: u64) -> Result<Self, ModelError> {
        let chol = cholesky_correlation(correlation)?;
        Ok(GaussianCopula {
            d: correlation.len(),
            chol,
            rng: ChaCha8Rng::seed_from_u64(seed),
            std_normal: Normal::new(0.0, 1.0).expect("unit normal"),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Next row of `dim` correlated uniforms.
    pub fn draw(&mut self) -> Vec<f64> {
        let z: Vec<f64> = (0..self.d)
            .map(|_| self.rng.sample::<f64, _>(StandardNormal))
            .collect();
        (0..self.d)
            .map(|i| {
                let x: f64 = (0..=i).map(|k| self.chol[i * self.d + k] * z[k]).sum();
                self.std_normal.cdf(x)
            })
            .collect()
    }

    /// An extra independent uniform from the same stream (for inputs outside
    /// the correlated block).
    pub fn draw_independent(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}
