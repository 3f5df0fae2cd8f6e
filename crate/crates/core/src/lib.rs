//! Aggregation rules for choice problems scored by correlated noisy agents.
//!
//! The crate provides the welfare rules (range voting, approval voting, Nash
//! product), Embedded Voting, maximum-likelihood weighting, a Gaussian noise
//! model with shared features, and a Monte Carlo harness that evaluates the
//! rules by their average relative utility.

pub mod baseline;
pub mod choice;
pub mod config;
pub mod error;
pub mod experiments;
pub mod likelihood;
mod linalg;
pub mod noise;
pub mod preprocessing;
pub mod report;
pub mod rule;
pub mod spectral;

pub use choice::{relative_utility, select_winner, AggregationOutcome, ChoiceProblem, ScoreMatrix};
pub use error::{Error, Result};
pub use experiments::{Figure, Parameter, ScenarioConfig, SweepResult};
pub use rule::Rule;
