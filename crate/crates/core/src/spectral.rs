//! Embedded Voting.
//!
//! Agents are embedded by their normalised score histories. For candidate `j`
//! the matrix with rows `sqrt(s_ij) * e_i` is formed; its top `k_hat` squared
//! singular values each measure the welfare of one latent group of agents, and
//! their product is the candidate's welfare. `k_hat` counts the singular
//! values of the full embedding matrix above 0.95 times their sum over the
//! number of agents.

use nalgebra::DMatrix;

use crate::choice::{AggregationOutcome, ScoreMatrix};
use crate::error::{Error, Result};
use crate::linalg::{sorted_eigenvalues, squared_singular_values};
use crate::preprocessing::{compute_embeddings, shift_to_positive_with, EmbeddingSet};

/// Fraction of the per-agent mean singular value a dimension must exceed to count.
pub const K_HAT_DISCOUNT: f64 = 0.95;

/// Mean the non-negative scores are shifted to before embedding.
pub const EV_TARGET_MEAN: f64 = 2.0;

/// Singular spectrum of the full embedding matrix and the retained dimension count.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDiagnostics {
    /// Descending, `min(n, p)` values.
    pub singular_values_full: Vec<f64>,
    pub k_hat: usize,
}

pub fn estimate_k(embeddings: &EmbeddingSet) -> SpectralDiagnostics {
    let squared = squared_singular_values(embeddings.as_matrix());
    let total: f64 = squared.iter().sum();
    let singular_values_full: Vec<f64> = squared.iter().map(|v| v.sqrt()).collect();
    if total <= 0.0 {
        return SpectralDiagnostics {
            singular_values_full,
            k_hat: 1,
        };
    }
    // averaged over agents: with fewer candidates than agents the missing
    // singular values count as zero
    let mean = singular_values_full.iter().sum::<f64>() / embeddings.n_agents() as f64;
    let threshold = K_HAT_DISCOUNT * mean;
    let above = singular_values_full.iter().filter(|&&v| v > threshold).count();
    SpectralDiagnostics {
        singular_values_full,
        k_hat: above.clamp(1, squared.len()),
    }
}

/// `n x p` matrix whose row `i` is `sqrt(s_ij) * e_i` for one candidate `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSpectralMatrix {
    values: DMatrix<f64>,
}

impl CandidateSpectralMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Singular values, descending, computed by a full SVD.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self
            .values
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }
}

fn check_shapes(s_nonneg: &ScoreMatrix, embeddings: &EmbeddingSet) -> Result<()> {
    if s_nonneg.n_agents() != embeddings.n_agents() {
        return Err(Error::usage(format!(
            "{} agents in scores but {} embeddings",
            s_nonneg.n_agents(),
            embeddings.n_agents()
        )));
    }
    Ok(())
}

fn nonneg_column(s_nonneg: &ScoreMatrix, column: usize) -> Result<Vec<f64>> {
    if column >= s_nonneg.n_candidates() {
        return Err(Error::usage(format!("candidate {column} out of range")));
    }
    let col = s_nonneg.column(column);
    if let Some((agent, v)) = col.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::usage(format!(
            "negative score {v} for agent {agent} on candidate {column}"
        )));
    }
    Ok(col)
}

pub fn candidate_matrix(
    column: usize,
    s_nonneg: &ScoreMatrix,
    embeddings: &EmbeddingSet,
) -> Result<CandidateSpectralMatrix> {
    check_shapes(s_nonneg, embeddings)?;
    let col = nonneg_column(s_nonneg, column)?;
    let mut values = embeddings.as_matrix().clone();
    for (mut row, s) in values.row_iter_mut().zip(&col) {
        row.scale_mut(s.sqrt());
    }
    Ok(CandidateSpectralMatrix { values })
}

/// Sum of the logs of the `k` largest values of `squared` (all of them if fewer);
/// `-inf` when one of them is numerically zero relative to `scale`.
fn log_top_product(squared: &[f64], k: usize, scale: f64) -> f64 {
    let zero = 1e-12 * scale;
    let mut welfare = 0.0;
    for &v in squared.iter().take(k) {
        if v <= zero {
            return f64::NEG_INFINITY;
        }
        welfare += v.ln();
    }
    welfare
}

/// Log-domain product of the `k_hat` largest squared singular values of each
/// candidate matrix.
///
/// Works on the smaller of the two Gram matrices: `D^1/2 (E E^T) D^1/2` when
/// there are fewer agents than embedding dimensions, `E^T D E` otherwise.
pub fn ev_welfare(s_nonneg: &ScoreMatrix, embeddings: &EmbeddingSet, k_hat: usize) -> Result<Vec<f64>> {
    check_shapes(s_nonneg, embeddings)?;
    if k_hat == 0 {
        return Err(Error::usage("k_hat must be at least 1"));
    }
    let e = embeddings.as_matrix();
    let (n, p) = (e.nrows(), e.ncols());
    let agent_gram = (n <= p).then(|| e * e.transpose());

    let mut welfare = Vec::with_capacity(s_nonneg.n_candidates());
    let mut gram = DMatrix::zeros(n.min(p), n.min(p));
    for j in 0..s_nonneg.n_candidates() {
        let col = nonneg_column(s_nonneg, j)?;
        match &agent_gram {
            Some(g) => {
                let roots: Vec<f64> = col.iter().map(|s| s.sqrt()).collect();
                for a in 0..n {
                    for b in 0..=a {
                        let v = g[(a, b)] * roots[a] * roots[b];
                        gram[(a, b)] = v;
                        gram[(b, a)] = v;
                    }
                }
            }
            None => {
                gram.fill(0.0);
                for (i, &s) in col.iter().enumerate() {
                    if s == 0.0 {
                        continue;
                    }
                    let row = e.row(i);
                    for a in 0..p {
                        let ra = s * row[a];
                        for b in 0..=a {
                            gram[(a, b)] += ra * row[b];
                        }
                    }
                }
                for a in 0..p {
                    for b in 0..a {
                        gram[(b, a)] = gram[(a, b)];
                    }
                }
            }
        }
        let trace = gram.trace();
        let squared = sorted_eigenvalues(gram.clone());
        welfare.push(log_top_product(&squared, k_hat, trace));
    }
    Ok(welfare)
}

/// Outcome of Embedded Voting with its spectral diagnostics.
#[derive(Debug, Clone)]
pub struct EmbeddedVotingOutcome {
    pub outcome: AggregationOutcome,
    pub diagnostics: SpectralDiagnostics,
}

/// Embedded Voting on the current candidates of `s`.
///
/// With `training`, the embeddings, `k_hat` and the per-agent shift statistics
/// are computed over the training and current candidates together.
pub fn embedded_voting(s: &ScoreMatrix, training: Option<&ScoreMatrix>) -> Result<EmbeddedVotingOutcome> {
    if s.n_candidates() < 2 {
        return Err(Error::usage("embedded voting needs at least 2 candidates"));
    }
    let joined;
    let basis = match training {
        Some(t) => {
            joined = s.concat_candidates(t)?;
            &joined
        }
        None => s,
    };
    let embeddings = compute_embeddings(basis)?;
    let diagnostics = estimate_k(&embeddings);
    let nonneg = shift_to_positive_with(s, basis, EV_TARGET_MEAN, 0.0)?;
    let welfare = ev_welfare(&nonneg, &embeddings, diagnostics.k_hat)?;
    Ok(EmbeddedVotingOutcome {
        outcome: AggregationOutcome::from_welfare(welfare)?,
        diagnostics,
    })
}
