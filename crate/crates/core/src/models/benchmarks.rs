//! Validation benchmarks with known sensitivity structure: a linear model on
//! correlated Gaussians (closed-form games for d = 2) and the Ishigami
//! function (analytic variance shares).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::copula::cholesky_correlation;
use super::ModelError;
use crate::dataset::{ColumnData, ColumnKind, ColumnSpec, Dataset};

/// `Y = Σ weightᵢ Xᵢ` with `X ~ N(0, correlation)`. Columns are named
/// `x1..xd`, the output `y`.
pub fn linear_gaussian_sample(
    n: usize,
    weights: &[f64],
    correlation: &[Vec<f64>],
    seed: u64,
) -> Result<Dataset, ModelError> {
    let d = correlation.len();
    if weights.len() != d {
        return Err(ModelError::WeightCountMismatch {
            got: weights.len(),
            expected: d,
        });
    }
    let chol = cholesky_correlation(correlation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(n); d];
    let mut output = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut y = 0.0;
        for i in 0..d {
            let x: f64 = (0..=i).map(|k| chol[i * d + k] * z[k]).sum();
            columns[i].push(x);
            y += weights[i] * x;
        }
        output.push(y);
    }
    let specs = (1..=d)
        .map(|i| ColumnSpec::input(&format!("x{i}"), ColumnKind::numeric()))
        .collect();
    let inputs = columns.into_iter().map(ColumnData::Numeric).collect();
    Ok(Dataset::from_parts(specs, inputs, "y", output)?)
}

/// The Ishigami function on three independent U(−π, π) inputs:
/// `Y = sin X₁ + a sin² X₂ + b X₃⁴ sin X₁`.
pub fn ishigami_sample(n: usize, a: f64, b: f64, seed: u64) -> Result<Dataset, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = std::f64::consts::PI;
    let mut columns = vec![Vec::with_capacity(n); 3];
    let mut output = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.gen_range(-pi..pi);
        let x2 = rng.gen_range(-pi..pi);
        let x3 = rng.gen_range(-pi..pi);
        columns[0].push(x1);
        columns[1].push(x2);
        columns[2].push(x3);
        output.push(x1.sin() + a * x2.sin().powi(2) + b * x3.powi(4) * x1.sin());
    }
    let specs = (1..=3)
        .map(|i| ColumnSpec::input(&format!("x{i}"), ColumnKind::numeric_range(-pi, pi)))
        .collect();
    let inputs = columns.into_iter().map(ColumnData::Numeric).collect();
    Ok(Dataset::from_parts(specs, inputs, "y", output)?)
}

/// Analytic total Sobol' indices of the Ishigami function.
pub fn ishigami_total_indices(a: f64, b: f64) -> [f64; 3] {
    let pi = std::f64::consts::PI;
    let p4 = pi.powi(4);
    let p8 = p4 * p4;
    // V(Y) and the closed first-order/total decomposition.
    let v1 = 0.5 * (1.0 + b * p4 / 5.0).powi(2);
    let v2 = a * a / 8.0;
    let v13 = b * b * p8 * (1.0 / 9.0 - 1.0 / 25.0) / 2.0;
    let total = v1 + v2 + v13;
    [(v1 + v13) / total, v2 / total, v13 / total]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_gaussian_output_is_the_weighted_sum() {
        let corr = vec![vec![1.0, 0.9], vec![0.9, 1.0]];
        let ds = linear_gaussian_sample(500, &[1.0, 0.0], &corr, 5).unwrap();
        assert_eq!(ds.d(), 2);
        let x1 = match ds.input(0) {
            ColumnData::Numeric(v) => v.clone(),
            _ => unreachable!(),
        };
        for (x, y) in x1.iter().zip(ds.output()) {
            assert_eq!(x, y, "weights (1,0) copy the first input");
        }
        // Sample correlation of the two inputs tracks the target.
        let x2 = match ds.input(1) {
            ColumnData::Numeric(v) => v.clone(),
            _ => unreachable!(),
        };
        let n = x1.len() as f64;
        let m1 = x1.iter().sum::<f64>() / n;
        let m2 = x2.iter().sum::<f64>() / n;
        let cov: f64 = x1.iter().zip(&x2).map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>() / n;
        let s1 = (x1.iter().map(|a| (a - m1) * (a - m1)).sum::<f64>() / n).sqrt();
        let s2 = (x2.iter().map(|a| (a - m2) * (a - m2)).sum::<f64>() / n).sqrt();
        assert!((cov / (s1 * s2) - 0.9).abs() < 0.03);
    }

    #[test]
    fn linear_gaussian_validates_shapes() {
        let corr = vec![vec![1.0, 0.2], vec![0.2, 1.0]];
        assert!(matches!(
            linear_gaussian_sample(100, &[1.0], &corr, 1),
            Err(ModelError::WeightCountMismatch { got: 1, expected: 2 })
        ));
        let bad = vec![vec![1.0, 1.01], vec![1.01, 1.0]];
        assert!(matches!(
            linear_gaussian_sample(100, &[1.0, 1.0], &bad, 1),
            Err(ModelError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn ishigami_matches_its_formula_rowwise() {
        let (a, b) = (7.0, 0.1);
        let ds = ishigami_sample(200, a, b, 3).unwrap();
        let get = |i: usize| match ds.input(i) {
            ColumnData::Numeric(v) => v.clone(),
            _ => unreachable!(),
        };
        let (x1, x2, x3) = (get(0), get(1), get(2));
        for i in 0..200 {
            let want = x1[i].sin() + a * x2[i].sin().powi(2) + b * x3[i].powi(4) * x1[i].sin();
            assert_eq!(ds.output()[i], want);
        }
    }

    #[test]
    fn ishigami_analytic_totals() {
        // a = 7, b = 0.1: the classic benchmark values.
        let t = ishigami_total_indices(7.0, 0.1);
        assert!((t[0] - 0.5574).abs() < 5e-4, "t1 = {}", t[0]);
        assert!((t[1] - 0.4424).abs() < 5e-4, "t2 = {}", t[1]);
        assert!((t[2] - 0.2437).abs() < 5e-4, "t3 = {}", t[2]);
        // b = 0 silences the third input entirely.
        let t = ishigami_total_indices(7.0, 0.0);
        assert_eq!(t[2], 0.0);
        // a = b = 0 leaves a pure sin X₁ model.
        let t = ishigami_total_indices(0.0, 0.0);
        assert_eq!(t[0], 1.0);
        assert_eq!(t[1], 0.0);
    }

    #[test]
    fn ishigami_is_seed_deterministic() {
        assert_eq!(
            ishigami_sample(50, 7.0, 0.1, 9).unwrap(),
            ishigami_sample(50, 7.0, 0.1, 9).unwrap()
        );
    }
}
