//! Per-agent normalisations and the score-based agent embeddings.
//!
//! Standard deviations are population ones (divide by the number of
//! candidates). A constant row has no scale; it standardises to zeros and
//! embeds as the zero vector.

use nalgebra::DMatrix;

use crate::choice::ScoreMatrix;
use crate::error::{Error, Result};

/// Mean and population standard deviation of one agent's scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowScale {
    pub mean: f64,
    pub std: f64,
}

impl RowScale {
    fn of(row: impl Iterator<Item = f64> + Clone) -> Self {
        let (count, sum) = row.clone().fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
        let mean = sum / count as f64;
        let var = row.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
        Self {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.std <= 1e-12 * self.mean.abs().max(1.0)
    }

    /// Standardised value, 0 for a constant row.
    pub fn apply(&self, v: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (v - self.mean) / self.std
        }
    }
}

fn require_two_candidates(s: &ScoreMatrix) -> Result<()> {
    if s.n_candidates() < 2 {
        return Err(Error::usage(format!(
            "per-agent normalisation needs at least 2 candidates, got {}",
            s.n_candidates()
        )));
    }
    Ok(())
}

/// Mean and standard deviation of each agent over the candidates of `s`.
pub fn row_scales(s: &ScoreMatrix) -> Result<Vec<RowScale>> {
    require_two_candidates(s)?;
    Ok(s.as_matrix()
        .row_iter()
        .map(|r| RowScale::of(r.iter().copied()))
        .collect())
}

fn map_rows(s: &ScoreMatrix, scales: &[RowScale], f: impl Fn(f64) -> f64) -> ScoreMatrix {
    let mut values = s.as_matrix().clone();
    for (mut row, scale) in values.row_iter_mut().zip(scales) {
        row.apply(|v| *v = f(scale.apply(*v)));
    }
    ScoreMatrix::from_matrix_unchecked(values)
}

/// Rescales each agent to zero mean and unit standard deviation.
pub fn standardize_rows(s: &ScoreMatrix) -> Result<ScoreMatrix> {
    let scales = row_scales(s)?;
    Ok(map_rows(s, &scales, |z| z))
}

/// Standardises `s` with statistics taken from `basis` (which must have the
/// same agents), e.g. current plus training candidates.
pub fn standardize_rows_with(s: &ScoreMatrix, basis: &ScoreMatrix) -> Result<ScoreMatrix> {
    check_same_agents(s, basis)?;
    let scales = row_scales(basis)?;
    Ok(map_rows(s, &scales, |z| z))
}

/// Standardises each agent, shifts it to mean `target_mean`, then clamps
/// everything below `floor` up to `floor`.
pub fn shift_to_positive(s: &ScoreMatrix, target_mean: f64, floor: f64) -> Result<ScoreMatrix> {
    shift_to_positive_with(s, s, target_mean, floor)
}

/// [`shift_to_positive`] with the per-agent statistics taken from `basis`.
pub fn shift_to_positive_with(
    s: &ScoreMatrix,
    basis: &ScoreMatrix,
    target_mean: f64,
    floor: f64,
) -> Result<ScoreMatrix> {
    check_same_agents(s, basis)?;
    let scales = row_scales(basis)?;
    Ok(map_rows(s, &scales, |z| (z + target_mean).max(floor)))
}

fn check_same_agents(s: &ScoreMatrix, basis: &ScoreMatrix) -> Result<()> {
    if s.n_agents() != basis.n_agents() {
        return Err(Error::usage(format!(
            "normalisation basis has {} agents, scores have {}",
            basis.n_agents(),
            s.n_agents()
        )));
    }
    Ok(())
}

/// Agent embeddings: one unit-norm row per agent (or a zero row for an agent
/// whose scores are constant).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    vectors: DMatrix<f64>,
}

impl EmbeddingSet {
    /// Wraps explicit embedding rows, e.g. exact group indicators.
    pub fn new(vectors: DMatrix<f64>) -> Result<Self> {
        if vectors.nrows() == 0 || vectors.ncols() == 0 {
            return Err(Error::usage("embedding set must be non-empty"));
        }
        for (row, r) in vectors.row_iter().enumerate() {
            let norm = r.norm();
            if norm != 0.0 && (norm - 1.0).abs() > 1e-9 {
                return Err(Error::EmbeddingRowNorm { row, norm });
            }
        }
        Ok(Self { vectors })
    }

    pub fn n_agents(&self) -> usize {
        self.vectors.nrows()
    }

    /// Dimension of each embedding vector.
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }
}

/// Z-scores each agent's row over all columns of `basis`, then divides by
/// `sqrt(p)` so that every non-constant row has unit Euclidean norm.
pub fn compute_embeddings(basis: &ScoreMatrix) -> Result<EmbeddingSet> {
    let scales = row_scales(basis)?;
    let root_p = (basis.n_candidates() as f64).sqrt();
    let z = map_rows(basis, &scales, |z| z / root_p);
    Ok(EmbeddingSet {
        vectors: z.into_matrix(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn one_row(r: &[f64]) -> ScoreMatrix {
        ScoreMatrix::from_rows(&[r.to_vec()]).unwrap()
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize_rows(&one_row(&[1.0, 3.0])).unwrap().row(0), vec![-1.0, 1.0]);
        assert_eq!(
            standardize_rows(&one_row(&[5.0, 5.0, 5.0])).unwrap().row(0),
            vec![0.0, 0.0, 0.0]
        );
        let r = standardize_rows(&one_row(&[0.0, 2.0, 4.0])).unwrap().row(0);
        let e = 1.5f64.sqrt();
        assert_abs_diff_eq!(r[0], -e, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[2], e, epsilon = 1e-12);
        assert!(standardize_rows(&one_row(&[1.0])).is_err());
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shift_to_positive(&one_row(&[1.0, 3.0]), 2.0, 0.1).unwrap().row(0), vec![1.0, 3.0]);
        // z-score of -10 in (-10, 2, 2) is -sqrt(2), so -sqrt(2) + 2 > 0.1 is not clamped;
        // use a more extreme outlier
        let r = shift_to_positive(&one_row(&[-30.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0]), 2.0, 0.1)
            .unwrap()
            .row(0);
        assert_eq!(r[0], 0.1);
        assert_eq!(
            shift_to_positive(&one_row(&[7.0, 7.0, 7.0]), 2.0, 0.1).unwrap().row(0),
            vec![2.0; 3]
        );
        assert!(shift_to_positive(&one_row(&[1.0]), 2.0, 0.0).is_err());
    }

    #[test]
    fn shift_three_entries_clamps_when_below_floor() {
        // (-10, 2, 2): mean -2, std sqrt(32), z = -sqrt(2) -> 2 - 1.414 = 0.586; floor 0.6 clamps
        let r = shift_to_positive(&one_row(&[-10.0, 2.0, 2.0]), 2.0, 0.6).unwrap().row(0);
        assert_eq!(r[0], 0.6);
        assert_abs_diff_eq!(r[1], 2.0 + 1.0 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn embedding_examples() {
        let s = ScoreMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0], vec![1.0, 2.0, 3.0]]).unwrap();
        let e = compute_embeddings(&s).unwrap();
        let m = e.as_matrix();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in m.row(0).iter().zip([-h, 0.0, h]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(m.row(0).dot(&m.row(1)), -1.0, epsilon = 1e-12);
        assert_eq!(m.row(0), m.row(2));
    }

    #[test]
    fn constant_agent_embeds_to_zero() {
        let s = ScoreMatrix::from_rows(&[vec![1.0, 2.0], vec![4.0, 4.0]]).unwrap();
        let e = compute_embeddings(&s).unwrap();
        assert_eq!(e.as_matrix().row(1).norm(), 0.0);
    }

    #[test]
    fn independent_streams_are_nearly_orthogonal() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let p = 10_000;
        let rows: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let e = compute_embeddings(&ScoreMatrix::from_rows(&rows).unwrap()).unwrap();
        let m = e.as_matrix();
        assert!(m.row(0).dot(&m.row(1)).abs() < 0.05);
    }

    #[test]
    fn embedding_set_validation() {
        assert!(EmbeddingSet::new(DMatrix::from_row_slice(1, 2, &[0.6, 0.8])).is_ok());
        assert!(EmbeddingSet::new(DMatrix::from_row_slice(1, 2, &[0.0, 0.0])).is_ok());
        assert!(EmbeddingSet::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).is_err());
    }

    fn row_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 2..15)
            .prop_filter("non-constant", |r| {
                let mean = r.iter().sum::<f64>() / r.len() as f64;
                r.iter().any(|v| (v - mean).abs() > 1e-3)
            })
    }

    proptest! {
        #[test]
        fn standardize_is_idempotent(r in row_strategy()) {
            let once = standardize_rows(&one_row(&r)).unwrap();
            let twice = standardize_rows(&once).unwrap();
            for (a, b) in once.row(0).iter().zip(twice.row(0)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn preprocessing_ignores_positive_affine_maps(
            r in row_strategy(),
            a in 0.01f64..100.0,
            b in -100.0f64..100.0,
        ) {
            let s = one_row(&r);
            let t = s.affine_per_agent(&[a], &[b]).unwrap();
            let pairs = [
                (standardize_rows(&s).unwrap(), standardize_rows(&t).unwrap()),
                (shift_to_positive(&s, 2.0, 0.1).unwrap(), shift_to_positive(&t, 2.0, 0.1).unwrap()),
            ];
            for (x, y) in pairs {
                for (u, v) in x.row(0).iter().zip(y.row(0)) {
                    prop_assert!((u - v).abs() < 1e-8);
                }
            }
            let (x, y) = (compute_embeddings(&s).unwrap(), compute_embeddings(&t).unwrap());
            prop_assert!((x.as_matrix() - y.as_matrix()).abs().max() < 1e-8);
            prop_assert!((x.as_matrix().row(0).norm() - 1.0).abs() < 1e-9);
        }
    }
}
