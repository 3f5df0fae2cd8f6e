//! Maximum-likelihood aggregation.
//!
//! With noise covariance `sigma`, the likelihood-maximising utility of a
//! candidate is the weighted average of its scores with weights
//! `w = 1^T pinv(sigma)`. The model-aware rule uses the true covariance; the
//! observational rules estimate it from the scores they see.

use nalgebra::{DMatrix, DVector};

use crate::choice::{AggregationOutcome, ScoreMatrix};
use crate::error::{Error, Result};
use crate::linalg::pinv_row_sums;
use crate::noise::{model_covariance, CovarianceMatrix, EmbeddingMatrix, NoiseParams};
use crate::preprocessing::{standardize_rows, standardize_rows_with};

/// Eigenvalues below this fraction of the largest are dropped by the pseudo-inverse.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;

/// Below this magnitude the weight total is considered zero.
pub const DEGENERATE_TOTAL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: DVector<f64>,
    pub total: f64,
}

impl WeightVector {
    pub fn new(weights: DVector<f64>) -> Self {
        let total = weights.sum();
        Self { weights, total }
    }

    pub fn uniform(n: usize) -> Self {
        Self::new(DVector::from_element(n, 1.0))
    }

    pub fn has_negative(&self) -> bool {
        self.weights.iter().any(|&w| w < 0.0)
    }
}

pub fn weights_from_covariance(sigma: &CovarianceMatrix) -> WeightVector {
    WeightVector::new(pinv_row_sums(sigma.as_matrix(), PINV_RELATIVE_CUTOFF))
}

/// Weighted average of each candidate's scores.
pub fn ml_estimate(s: &ScoreMatrix, w: &WeightVector) -> Result<Vec<f64>> {
    if w.weights.len() != s.n_agents() {
        return Err(Error::usage(format!(
            "{} weights for {} agents",
            w.weights.len(),
            s.n_agents()
        )));
    }
    if w.total.abs() <= DEGENERATE_TOTAL {
        return Err(Error::DegenerateWeights { total: w.total });
    }
    Ok(s.as_matrix()
        .column_iter()
        .map(|c| c.dot(&w.weights) / w.total)
        .collect())
}

/// Population covariance of the standardised rows of `s_obs`, with agents as
/// variables and candidates as samples.
pub fn empirical_covariance(s_obs: &ScoreMatrix) -> Result<CovarianceMatrix> {
    let z = standardize_rows(s_obs)?;
    Ok(covariance_of_standardized(z.as_matrix()))
}

fn covariance_of_standardized(z: &DMatrix<f64>) -> CovarianceMatrix {
    // standardised rows are already centred
    let p = z.ncols() as f64;
    let mut cov = z * z.transpose() / p;
    // exact symmetry for the eigen-solver
    for i in 0..cov.nrows() {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    CovarianceMatrix::from_matrix_unchecked(cov)
}

/// Model-aware rule: raw scores weighted by the true noise covariance.
pub fn ga_rule(s: &ScoreMatrix, embedding: &EmbeddingMatrix, params: NoiseParams) -> Result<AggregationOutcome> {
    if embedding.n_agents() != s.n_agents() {
        return Err(Error::usage("embedding and scores disagree on the agent count"));
    }
    ga_rule_with_weights(s, &model_weights(embedding, params))
}

/// Weights from the true noise covariance. A noiseless model makes every agent
/// exact, so uniform weights are used.
pub fn model_weights(embedding: &EmbeddingMatrix, params: NoiseParams) -> WeightVector {
    if params.sigma_d == 0.0 && params.sigma_f == 0.0 {
        return WeightVector::uniform(embedding.n_agents());
    }
    weights_from_covariance(&model_covariance(embedding, params))
}

/// [`ga_rule`] with precomputed model weights.
pub fn ga_rule_with_weights(s: &ScoreMatrix, w: &WeightVector) -> Result<AggregationOutcome> {
    AggregationOutcome::from_welfare(ml_estimate(s, w)?)
}

/// Observational maximum likelihood and what happened to its weights.
#[derive(Debug, Clone)]
pub struct MlOutcome {
    pub outcome: AggregationOutcome,
    /// The estimated weights summed to zero and uniform weights were used.
    pub used_fallback: bool,
    pub negative_weights: bool,
}

/// Maximum likelihood with the covariance estimated from the observed scores,
/// or from training and current scores together when `training` is given.
pub fn ml_rule(s: &ScoreMatrix, training: Option<&ScoreMatrix>) -> Result<MlOutcome> {
    if s.n_candidates() < 2 {
        return Err(Error::usage("maximum likelihood needs at least 2 candidates"));
    }
    let (current, sigma_hat) = match training {
        Some(t) => {
            let basis = s.concat_candidates(t)?;
            let z = standardize_rows(&basis)?;
            (standardize_rows_with(s, &basis)?, covariance_of_standardized(z.as_matrix()))
        }
        None => {
            let z = standardize_rows(s)?;
            let sigma = covariance_of_standardized(z.as_matrix());
            (z, sigma)
        }
    };
    let w = weights_from_covariance(&sigma_hat);
    let negative_weights = w.has_negative();
    let (welfare, used_fallback) = match ml_estimate(&current, &w) {
        Ok(welfare) => (welfare, false),
        Err(Error::DegenerateWeights { .. }) => {
            (ml_estimate(&current, &WeightVector::uniform(s.n_agents()))?, true)
        }
        Err(e) => return Err(e),
    };
    Ok(MlOutcome {
        outcome: AggregationOutcome::from_welfare(welfare)?,
        used_fallback,
        negative_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_reference_embedding, sample_candidates};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_covariance_gives_uniform_weights() {
        let sigma = CovarianceMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let w = weights_from_covariance(&sigma);
        for v in w.weights.iter() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn clone_groups_weigh_inverse_group_size() {
        let e = build_reference_embedding(2, 1).unwrap();
        let sigma = model_covariance(&e, NoiseParams::new(0.0, 1.0).unwrap());
        let w = weights_from_covariance(&sigma);
        assert_abs_diff_eq!(w.weights[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(w.weights[1], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(w.weights[2], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn near_singular_estimate_produces_negative_weights() {
        let e = build_reference_embedding(20, 4).unwrap();
        let params = NoiseParams::new(0.1, 1.0).unwrap();
        let (_, s) = sample_candidates(&e, params, 24, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let w = weights_from_covariance(&empirical_covariance(&s).unwrap());
        assert!(w.has_negative());
    }

    #[test]
    fn estimate_examples() {
        let s = ScoreMatrix::from_rows(&[vec![3.0], vec![5.0]]).unwrap();
        assert_eq!(ml_estimate(&s, &WeightVector::uniform(2)).unwrap(), vec![4.0]);

        let s = ScoreMatrix::from_rows(&[vec![2.0], vec![2.0], vec![5.0]]).unwrap();
        let w = WeightVector::new(DVector::from_vec(vec![0.5, 0.5, 1.0]));
        assert_abs_diff_eq!(ml_estimate(&s, &w).unwrap()[0], 3.5, epsilon = 1e-12);

        // negative weight leaves the convex hull of the scores
        let s = ScoreMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let w = WeightVector::new(DVector::from_vec(vec![-1.0, 2.0]));
        assert_abs_diff_eq!(ml_estimate(&s, &w).unwrap()[0], 2.0, epsilon = 1e-12);

        let w = WeightVector::new(DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(ml_estimate(&s, &w), Err(Error::DegenerateWeights { .. })));
    }

    #[test]
    fn empirical_covariance_examples() {
        let s = ScoreMatrix::from_rows(&[vec![1.0, 4.0, 2.0], vec![1.0, 4.0, 2.0]]).unwrap();
        let c = empirical_covariance(&s).unwrap();
        assert_abs_diff_eq!(c.as_matrix()[(0, 1)], 1.0, epsilon = 1e-12);
        assert!(empirical_covariance(&ScoreMatrix::from_rows(&[vec![1.0]]).unwrap()).is_err());

        let e = EmbeddingMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let (_, s) = sample_candidates(&e, NoiseParams::new(1.0, 0.0).unwrap(), 10_000, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        // independent noise but a shared utility: correlation 1/2 across agents
        let c = empirical_covariance(&s).unwrap();
        assert!((c.as_matrix()[(0, 1)] - 0.5).abs() < 0.05);
    }

    #[test]
    fn empirical_covariance_overestimates_group_correlation() {
        let e = build_reference_embedding(20, 4).unwrap();
        let params = NoiseParams::new(0.1, 1.0).unwrap();
        let (_, s) = sample_candidates(&e, params, 10_000, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        let c = empirical_covariance(&s).unwrap();
        let m = c.as_matrix();
        let expected = (1.0 + 1.0) / (1.0 + 0.01 + 1.0);
        assert!((m[(0, 1)] / m[(0, 0)] - expected).abs() < 0.02);
        // the true noise correlation is lower
        assert!(expected > 1.0 / 1.01);
    }

    #[test]
    fn ga_examples() {
        let e = EmbeddingMatrix::new(DMatrix::identity(5, 5)).unwrap();
        let params = NoiseParams::new(0.3, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (_, s) = sample_candidates(&e, params, 8, &mut rng).unwrap();
            // equal per-agent variance, so raw and standardised averages rank alike up to scale
            let ga = ga_rule(&s, &e, params).unwrap();
            let raw_mean: Vec<f64> = s.as_matrix().column_iter().map(|c| c.mean()).collect();
            assert_eq!(ga.winner, crate::choice::select_winner(&raw_mean).unwrap());
        }

        let e = build_reference_embedding(20, 4).unwrap();
        let noiseless = NoiseParams::new(0.0, 0.0).unwrap();
        let (u, s) = sample_candidates(&e, noiseless, 20, &mut rng).unwrap();
        let ga = ga_rule(&s, &e, noiseless).unwrap();
        assert_eq!(crate::choice::relative_utility(&u, ga.winner).unwrap(), 1.0);
    }

    #[test]
    fn ml_rule_flags_and_shapes() {
        let e = build_reference_embedding(20, 4).unwrap();
        let params = NoiseParams::new(0.1, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (_, s) = sample_candidates(&e, params, 20, &mut rng).unwrap();
        let (_, t) = sample_candidates(&e, params, 200, &mut rng).unwrap();
        let plain = ml_rule(&s, None).unwrap();
        assert_eq!(plain.outcome.welfare.len(), 20);
        let trained = ml_rule(&s, Some(&t)).unwrap();
        assert_eq!(trained.outcome.welfare.len(), 20);
        assert!(!trained.used_fallback);
        assert!(ml_rule(&ScoreMatrix::from_rows(&[vec![1.0]]).unwrap(), None).is_err());
    }
}
