//! Shared domain types: score matrices, choice problems, rule outcomes, plus
//! winner selection and the relative-utility metric.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Scores given by `n` agents (rows) to `m` candidates (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    values: DMatrix<f64>,
}

impl ScoreMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::usage(format!(
                "score matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::usage(format!("score matrix contains non-finite value {bad}")));
        }
        Ok(Self { values })
    }

    /// Builds a matrix from one `Vec` per agent.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::usage("score rows have different lengths"));
        }
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub(crate) fn from_matrix_unchecked(values: DMatrix<f64>) -> Self {
        debug_assert!(values.nrows() > 0 && values.ncols() > 0);
        Self { values }
    }

    /// Number of agents.
    pub fn n_agents(&self) -> usize {
        self.values.nrows()
    }

    /// Number of candidates.
    pub fn n_candidates(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, agent: usize, candidate: usize) -> f64 {
        self.values[(agent, candidate)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }

    pub fn row(&self, agent: usize) -> Vec<f64> {
        self.values.row(agent).iter().copied().collect()
    }

    pub fn column(&self, candidate: usize) -> Vec<f64> {
        self.values.column(candidate).iter().copied().collect()
    }

    /// Places `other`'s candidates after this matrix's candidates.
    pub fn concat_candidates(&self, other: &ScoreMatrix) -> Result<ScoreMatrix> {
        if other.n_agents() != self.n_agents() {
            return Err(Error::usage(format!(
                "cannot concatenate score matrices with {} and {} agents",
                self.n_agents(),
                other.n_agents()
            )));
        }
        let (n, m) = (self.n_agents(), self.n_candidates());
        let mut values = DMatrix::zeros(n, m + other.n_candidates());
        values.columns_mut(0, m).copy_from(&self.values);
        values
            .columns_mut(m, other.n_candidates())
            .copy_from(&other.values);
        Ok(Self { values })
    }

    /// Applies `scale[i] * s + offset[i]` to every score of agent `i`.
    pub fn affine_per_agent(&self, scale: &[f64], offset: &[f64]) -> Result<ScoreMatrix> {
        if scale.len() != self.n_agents() || offset.len() != self.n_agents() {
            return Err(Error::usage("affine transform length does not match agent count"));
        }
        let mut values = self.values.clone();
        for (i, mut row) in values.row_iter_mut().enumerate() {
            row.apply(|v| *v = scale[i] * *v + offset[i]);
        }
        ScoreMatrix::new(values)
    }
}

/// One draw of the experiment: true utilities, observed scores and an
/// optional history of scores on training candidates.
#[derive(Debug, Clone)]
pub struct ChoiceProblem {
    pub utilities: Vec<f64>,
    pub scores: ScoreMatrix,
    pub training_scores: Option<ScoreMatrix>,
}

impl ChoiceProblem {
    pub fn new(
        utilities: Vec<f64>,
        scores: ScoreMatrix,
        training_scores: Option<ScoreMatrix>,
    ) -> Result<Self> {
        if utilities.len() != scores.n_candidates() {
            return Err(Error::usage(format!(
                "{} utilities for {} candidates",
                utilities.len(),
                scores.n_candidates()
            )));
        }
        if let Some(t) = &training_scores {
            if t.n_agents() != scores.n_agents() {
                return Err(Error::usage("training scores have a different agent count"));
            }
        }
        Ok(Self {
            utilities,
            scores,
            training_scores,
        })
    }
}

/// Per-candidate welfare and the selected candidate.
///
/// Welfare may hold `f64::NEG_INFINITY` for rules working in the log domain
/// when a product collapses to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationOutcome {
    pub welfare: Vec<f64>,
    pub winner: usize,
}

impl AggregationOutcome {
    pub fn from_welfare(welfare: Vec<f64>) -> Result<Self> {
        let winner = select_winner(&welfare)?;
        Ok(Self { welfare, winner })
    }
}

/// Welfare values this close to the maximum, relative to `max(1, |max|)`,
/// count as tied with it.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Index of the maximal welfare; ties go to the lowest index. Values within
/// [`TIE_TOLERANCE`] of the maximum are ties, so exact ties stay ties under
/// rounding.
pub fn select_winner(welfare: &[f64]) -> Result<usize> {
    if welfare.is_empty() {
        return Err(Error::usage("cannot select a winner among zero candidates"));
    }
    let top = welfare.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Ok(0);
    }
    let cutoff = top - TIE_TOLERANCE * top.abs().max(1.0);
    Ok(welfare.iter().position(|&w| w >= cutoff).unwrap_or(0))
}

/// `(u(winner) - u_min) / (u_max - u_min)`, or 1 when all utilities coincide.
pub fn relative_utility(utilities: &[f64], winner: usize) -> Result<f64> {
    if utilities.len() < 2 {
        return Err(Error::usage(format!(
            "relative utility needs at least 2 candidates, got {}",
            utilities.len()
        )));
    }
    let chosen = *utilities
        .get(winner)
        .ok_or_else(|| Error::usage(format!("winner {winner} out of range")))?;
    let (lo, hi) = utilities
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| {
            (lo.min(u), hi.max(u))
        });
    if hi == lo {
        return Ok(1.0);
    }
    Ok((chosen - lo) / (hi - lo))
}
