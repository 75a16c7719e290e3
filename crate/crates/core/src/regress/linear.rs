use crate::error::{Error, Result};
use crate::features::FEATURE_COUNT;

use super::linalg::lstsq;

/// ERD as a plain inner product with the standardized descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub theta: [f64; FEATURE_COUNT],
}

impl LinearModel {
    #[inline]
    pub fn predict(&self, v: &[f64; FEATURE_COUNT]) -> f64 {
        v.iter().zip(&self.theta).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub model: LinearModel,
    pub rank: usize,
    /// Set when the design matrix was rank deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
    /// `‖R − Vθ‖`
    pub residual_norm: f64,
}

/// Least-squares fit of `θ` minimizing `‖R − Vθ‖²`.
pub fn fit_linear(v: &[[f64; FEATURE_COUNT]], r: &[f64]) -> Result<LinearFit> {
    if v.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if v.len() != r.len() {
        return Err(Error::InvalidParameter(format!(
            "{} feature rows but {} targets",
            v.len(),
            r.len()
        )));
    }
    if let Some(bad) = r.iter().chain(v.iter().flatten()).find(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("non-finite training value {bad}")));
    }
    let flat: Vec<f64> = v.iter().flatten().copied().collect();
    let sol = lstsq(&flat, v.len(), FEATURE_COUNT, r);
    let mut theta = [0.0; FEATURE_COUNT];
    theta.copy_from_slice(&sol.x);
    let model = LinearModel { theta };
    let residual_norm = v
        .iter()
        .zip(r)
        .map(|(row, t)| (t - model.predict(row)).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LinearFit {
        model,
        rank: sol.rank,
        rank_deficient: sol.rank < FEATURE_COUNT,
        residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn recovers_generator_on_consistent_system() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let theta: [f64; 6] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let v: Vec<[f64; 6]> = (0..80)
            .map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0)))
            .collect();
        let r: Vec<f64> = v
            .iter()
            .map(|row| row.iter().zip(&theta).map(|(a, b)| a * b).sum())
            .collect();
        let fit = fit_linear(&v, &r).unwrap();
        assert!(!fit.rank_deficient);
        for j in 0..6 {
            assert!((fit.model.theta[j] - theta[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_design_returns_targets() {
        let v: Vec<[f64; 6]> = (0..6)
            .map(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }))
            .collect();
        let r = [5.0, -1.0, 0.25, 7.0, 3.0, -8.5];
        let fit = fit_linear(&v, &r).unwrap();
        assert_eq!(fit.rank, 6);
        for j in 0..6 {
            assert!((fit.model.theta[j] - r[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn residual_orthogonal_to_columns() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let v: Vec<[f64; 6]> = (0..200)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let r: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..100.0)).collect();
        let fit = fit_linear(&v, &r).unwrap();
        let rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut vt_res = [0.0f64; 6];
        for (row, t) in v.iter().zip(&r) {
            let res = t - fit.model.predict(row);
            for j in 0..6 {
                vt_res[j] += row[j] * res;
            }
        }
        let n = vt_res.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(n <= 1e-6 * rnorm, "{n}");
    }

    #[test]
    fn zero_targets_and_degenerate_columns_give_zero_theta() {
        // constant training images produce zero gradient features and zero RD
        let v: Vec<[f64; 6]> = (0..20).map(|i| [0.0, 0.0, 0.0, 0.0, (i % 5) as f64, 0.5]).collect();
        let fit = fit_linear(&v, &[0.0; 20]).unwrap();
        assert!(fit.rank_deficient);
        assert_eq!(fit.model.theta, [0.0; 6]);
    }

    #[test]
    fn input_validation() {
        assert!(matches!(fit_linear(&[], &[]), Err(Error::EmptyDatabase)));
        assert!(fit_linear(&[[0.0; 6]], &[1.0, 2.0]).is_err());
        assert!(fit_linear(&[[f64::NAN; 6]], &[1.0]).is_err());
    }
}
