//! Welfare rules that ignore correlations: range voting, approval voting,
//! Nash product, a single agent and a uniformly random pick.

use rand::Rng;

use crate::choice::{select_winner, AggregationOutcome, ScoreMatrix};
use crate::error::{Error, Result};
use crate::preprocessing::{shift_to_positive, standardize_rows};

/// Floor applied to shifted scores before taking the Nash product.
pub const NASH_FLOOR: f64 = 0.1;

fn column_sums(s: &ScoreMatrix) -> Vec<f64> {
    s.as_matrix().column_iter().map(|c| c.sum()).collect()
}

pub fn range_voting(s: &ScoreMatrix) -> Result<AggregationOutcome> {
    let z = standardize_rows(s)?;
    AggregationOutcome::from_welfare(column_sums(&z))
}

/// Each agent approves the candidates it scores at or above its own mean.
/// Ties on the approval count go to the largest product of the approving
/// agents' positive standardised scores, then to the lowest index.
pub fn approval_voting(s: &ScoreMatrix) -> Result<AggregationOutcome> {
    let z = standardize_rows(s)?;
    let mut counts = Vec::with_capacity(z.n_candidates());
    let mut log_products = Vec::with_capacity(z.n_candidates());
    for col in z.as_matrix().column_iter() {
        let mut count = 0.0;
        let mut log_product = 0.0;
        for &v in col.iter().filter(|&&v| v >= 0.0) {
            count += 1.0;
            if v > 0.0 {
                log_product += v.ln();
            }
        }
        counts.push(count);
        log_products.push(log_product);
    }
    let top = counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tie_break: Vec<f64> = counts
        .iter()
        .zip(&log_products)
        .map(|(&c, &lp)| if c == top { lp } else { f64::NEG_INFINITY })
        .collect();
    let winner = select_winner(&tie_break)?;
    Ok(AggregationOutcome {
        welfare: counts,
        winner,
    })
}

/// Product of the scores shifted to mean 2 and floored at 0.1, in the log domain.
pub fn nash_product(s: &ScoreMatrix) -> Result<AggregationOutcome> {
    let shifted = shift_to_positive(s, 2.0, NASH_FLOOR)?;
    let welfare = shifted
        .as_matrix()
        .column_iter()
        .map(|c| c.iter().map(|v| v.ln()).sum())
        .collect();
    AggregationOutcome::from_welfare(welfare)
}

pub fn single_agent(s: &ScoreMatrix, agent_index: usize) -> Result<AggregationOutcome> {
    if agent_index >= s.n_agents() {
        return Err(Error::usage(format!(
            "agent {agent_index} out of range for {} agents",
            s.n_agents()
        )));
    }
    let z = standardize_rows(s)?;
    AggregationOutcome::from_welfare(z.row(agent_index))
}

pub fn random_winner<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<AggregationOutcome> {
    if m == 0 {
        return Err(Error::usage("cannot pick among zero candidates"));
    }
    Ok(AggregationOutcome {
        welfare: vec![0.0; m],
        winner: rng.random_range(0..m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scores(rows: &[&[f64]]) -> ScoreMatrix {
        ScoreMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn range_voting_examples() {
        let o = range_voting(&scores(&[&[1.0, 3.0], &[1.0, 3.0]])).unwrap();
        assert_eq!(o.welfare, vec![-2.0, 2.0]);
        assert_eq!(o.winner, 1);
        let o = range_voting(&scores(&[&[1.0, 3.0], &[3.0, 1.0]])).unwrap();
        assert_eq!(o.welfare, vec![0.0, 0.0]);
        assert_eq!(o.winner, 0);
        assert!(range_voting(&scores(&[&[1.0]])).is_err());
    }

    #[test]
    fn approval_examples() {
        let o = approval_voting(&scores(&[&[-1.0, 1.0], &[-1.0, 1.0]])).unwrap();
        assert_eq!(o.welfare, vec![0.0, 2.0]);
        assert_eq!(o.winner, 1);

        // every candidate gets one approval; agent 0's z on c0 is the largest product
        let s = scores(&[&[2.0, -1.0, -1.0], &[-1.0, 0.5, 0.5]]);
        let z = standardize_rows(&s).unwrap();
        assert!(z.get(0, 0) > z.get(1, 1));
        let o = approval_voting(&s).unwrap();
        assert_eq!(o.welfare, vec![1.0, 1.0, 1.0]);
        assert_eq!(o.winner, 0);
        let o = approval_voting(&scores(&[&[-1.0, -1.0, 2.0], &[0.5, 0.5, -1.0]])).unwrap();
        assert_eq!(o.winner, 2);
    }

    #[test]
    fn nash_examples() {
        // clamped column (2,2,2) beats (1,4,1) although its sum is smaller
        let shifted = scores(&[&[2.0, 1.0], &[2.0, 4.0], &[2.0, 1.0]]);
        let logs: Vec<f64> = shifted
            .as_matrix()
            .column_iter()
            .map(|c| c.iter().map(|v| v.ln()).sum())
            .collect();
        assert_abs_diff_eq!(logs[0], 3.0 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(logs[1], 4f64.ln(), epsilon = 1e-12);
        assert_eq!(select_winner(&logs).unwrap(), 0);

        let o = nash_product(&scores(&[&[1.0, 3.0]])).unwrap();
        assert_eq!(o.winner, 1);
        assert!(o.welfare.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn single_agent_examples() {
        let s = scores(&[&[1.0, 5.0, 2.0], &[3.0, 1.0, 2.0]]);
        assert_eq!(single_agent(&s, 0).unwrap().winner, 1);
        assert_eq!(single_agent(&s, 1).unwrap().winner, 0);
        assert!(single_agent(&s, 2).is_err());
        let clones = scores(&[&[0.3, 0.1, 0.9], &[0.3, 0.1, 0.9]]);
        assert_eq!(
            single_agent(&clones, 0).unwrap().winner,
            single_agent(&clones, 1).unwrap().winner
        );
    }

    #[test]
    fn random_winner_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(random_winner(1, &mut rng).unwrap().winner, 0);
        let a: Vec<usize> = {
            let mut r = ChaCha8Rng::seed_from_u64(77);
            (0..50).map(|_| random_winner(20, &mut r).unwrap().winner).collect()
        };
        let b: Vec<usize> = {
            let mut r = ChaCha8Rng::seed_from_u64(77);
            (0..50).map(|_| random_winner(20, &mut r).unwrap().winner).collect()
        };
        assert_eq!(a, b);
        assert!(a.iter().all(|&w| w < 20));
        assert!(random_winner(0, &mut rng).is_err());
    }
}
