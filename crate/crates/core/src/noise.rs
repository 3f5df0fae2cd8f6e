//! Gaussian noise model with shared features.
//!
//! Each agent `i` scores candidate `j` as
//! `u_j + sigma_d * d_ij + sigma_f * sum_l E[i,l] * f_lj` where all `d` and `f`
//! are independent standard normals. Conditionally on `u_j`, the score column
//! is Gaussian with covariance `sigma_d^2 I + sigma_f^2 E E^T`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::choice::{ChoiceProblem, ScoreMatrix};
use crate::error::{Error, Result};

const ROW_NORM_TOLERANCE: f64 = 1e-9;

/// `n x k` matrix placing agents in feature space. Rows have unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: DMatrix<f64>,
}

impl EmbeddingMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::usage("embedding matrix needs at least one agent"));
        }
        for (row, r) in values.row_iter().enumerate() {
            if r.iter().all(|&v| v == 0.0) {
                return Err(Error::EmbeddingRowZero { row });
            }
            let norm = r.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > ROW_NORM_TOLERANCE {
                return Err(Error::EmbeddingRowNorm { row, norm });
            }
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::usage("embedding rows have different lengths"));
        }
        Self::new(DMatrix::from_fn(rows.len(), k, |i, l| rows[i][l]))
    }

    pub fn n_agents(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Distinct (per-agent) and feature (shared) noise intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub sigma_d: f64,
    pub sigma_f: f64,
}

impl NoiseParams {
    pub fn new(sigma_d: f64, sigma_f: f64) -> Result<Self> {
        for (name, v) in [("sigma_d", sigma_d), ("sigma_f", sigma_f)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::usage(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        Ok(Self { sigma_d, sigma_f })
    }
}

/// Symmetric positive semi-definite `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    values: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() || values.nrows() == 0 {
            return Err(Error::usage("covariance matrix must be square and non-empty"));
        }
        let n = values.nrows();
        for i in 0..n {
            for j in 0..i {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-9 {
                    return Err(Error::usage(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        let min_eig = values
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 {
            return Err(Error::usage(format!(
                "covariance not positive semi-definite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { values })
    }

    pub(crate) fn from_matrix_unchecked(values: DMatrix<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// One correlated group of `group_size` agents sharing feature 0, followed by
/// `n_independent` agents each owning a private feature.
pub fn build_reference_embedding(group_size: usize, n_independent: usize) -> Result<EmbeddingMatrix> {
    let n = group_size + n_independent;
    if n == 0 {
        return Err(Error::usage("reference embedding needs at least one agent"));
    }
    let k = 1 + n_independent;
    let values = DMatrix::from_fn(n, k, |i, l| {
        let feature = if i < group_size { 0 } else { 1 + i - group_size };
        if l == feature {
            1.0
        } else {
            0.0
        }
    });
    EmbeddingMatrix::new(values)
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::usage(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Group block with correlation decaying with index distance (`alpha^|i-i'|`,
/// rows rescaled to unit norm), plus an identity block for the independent agents.
pub fn build_cohesion_embedding(
    alpha: f64,
    group_size: usize,
    n_independent: usize,
) -> Result<EmbeddingMatrix> {
    check_unit_interval("alpha", alpha)?;
    let n = group_size + n_independent;
    if n == 0 {
        return Err(Error::usage("cohesion embedding needs at least one agent"));
    }
    let mut values = DMatrix::zeros(n, n);
    for i in 0..group_size {
        for l in 0..group_size {
            // powi(0) is 1 even for alpha = 0
            values[(i, l)] = alpha.powi(i.abs_diff(l) as i32);
        }
        let norm = values.row(i).norm();
        values.row_mut(i).unscale_mut(norm);
    }
    for t in group_size..n {
        values[(t, t)] = 1.0;
    }
    EmbeddingMatrix::new(values)
}

/// Reference layout where each independent agent also leaks weight `beta`
/// onto the group feature (rows rescaled by `1/sqrt(beta^2 + (1-beta)^2)`).
pub fn build_absorption_embedding(
    beta: f64,
    group_size: usize,
    n_independent: usize,
) -> Result<EmbeddingMatrix> {
    check_unit_interval("beta", beta)?;
    let n = group_size + n_independent;
    if n == 0 {
        return Err(Error::usage("absorption embedding needs at least one agent"));
    }
    let c = 1.0 / (beta * beta + (1.0 - beta) * (1.0 - beta)).sqrt();
    let mut values = DMatrix::zeros(n, 1 + n_independent);
    for i in 0..group_size {
        values[(i, 0)] = 1.0;
    }
    for t in 0..n_independent {
        values[(group_size + t, 0)] = c * beta;
        values[(group_size + t, 1 + t)] = c * (1.0 - beta);
    }
    // renormalise to absorb rounding in c
    for i in group_size..n {
        let norm = values.row(i).norm();
        values.row_mut(i).unscale_mut(norm);
    }
    EmbeddingMatrix::new(values)
}

/// `sigma_d^2 I + sigma_f^2 E E^T`.
pub fn model_covariance(embedding: &EmbeddingMatrix, params: NoiseParams) -> CovarianceMatrix {
    let e = embedding.as_matrix();
    let mut sigma = e * e.transpose() * (params.sigma_f * params.sigma_f);
    for i in 0..sigma.nrows() {
        sigma[(i, i)] += params.sigma_d * params.sigma_d;
    }
    CovarianceMatrix::from_matrix_unchecked(sigma)
}

/// Draws `count` candidates: utilities from N(0,1) and the agents' noisy scores.
///
/// Per candidate the draw order is `u`, then `d_1..d_n`, then `f_1..f_k`.
pub fn sample_candidates<R: Rng + ?Sized>(
    embedding: &EmbeddingMatrix,
    params: NoiseParams,
    count: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, ScoreMatrix)> {
    if count == 0 {
        return Err(Error::usage("cannot sample zero candidates"));
    }
    let e = embedding.as_matrix();
    let (n, k) = (e.nrows(), e.ncols());
    let mut utilities = Vec::with_capacity(count);
    let mut scores = DMatrix::zeros(n, count);
    let mut features = vec![0.0; k];
    for j in 0..count {
        let u: f64 = rng.sample(StandardNormal);
        utilities.push(u);
        let mut column = scores.column_mut(j);
        for s in column.iter_mut() {
            let d: f64 = rng.sample(StandardNormal);
            *s = u + params.sigma_d * d;
        }
        for f in features.iter_mut() {
            *f = rng.sample(StandardNormal);
        }
        if params.sigma_f != 0.0 {
            for i in 0..n {
                let mut shared = 0.0;
                for (l, f) in features.iter().enumerate() {
                    shared += e[(i, l)] * f;
                }
                column[i] += params.sigma_f * shared;
            }
        }
    }
    Ok((utilities, ScoreMatrix::from_matrix_unchecked(scores)))
}

/// Samples `m` current candidates, then `m_train` training candidates (none if 0)
/// from the same model. The current candidates do not depend on `m_train`.
pub fn sample_problem<R: Rng + ?Sized>(
    embedding: &EmbeddingMatrix,
    params: NoiseParams,
    m: usize,
    m_train: usize,
    rng: &mut R,
) -> Result<ChoiceProblem> {
    let (utilities, scores) = sample_candidates(embedding, params, m, rng)?;
    let training = if m_train > 0 {
        Some(sample_candidates(embedding, params, m_train, rng)?.1)
    } else {
        None
    };
    ChoiceProblem::new(utilities, scores, training)
}
