//! Monte Carlo harness: scenarios, paired trials, sweeps and the figure catalog.
//!
//! Trial `t` of a scenario draws its choice problem from its own ChaCha stream
//! `t` under the master seed, so every number depends only on
//! `(master_seed, config)`: neither the rule subset nor the worker count
//! changes any draw. Aggregation runs in trial order after the parallel map.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baseline::{approval_voting, nash_product, random_winner, range_voting, single_agent};
use crate::choice::{relative_utility, AggregationOutcome, ChoiceProblem, ScoreMatrix};
use crate::error::{Error, Result};
use crate::likelihood::{ga_rule_with_weights, ml_rule, model_weights, WeightVector};
use crate::noise::{
    build_absorption_embedding, build_cohesion_embedding, build_reference_embedding,
    sample_candidates, sample_problem, EmbeddingMatrix, NoiseParams,
};
use crate::rule::Rule;
use crate::spectral::embedded_voting;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRIALS: usize = 10_000;

const RULE_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const SHARED_TRAINING_SALT: u64 = 0xd1b5_4a32_d192_ed03;

/// How the agents' feature matrix is built.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingSpec {
    Reference { group_size: usize, n_independent: usize },
    Cohesion { alpha: f64, group_size: usize, n_independent: usize },
    Absorption { beta: f64, group_size: usize, n_independent: usize },
    Explicit { rows: Vec<Vec<f64>> },
}

impl EmbeddingSpec {
    pub fn build(&self) -> Result<EmbeddingMatrix> {
        match self {
            EmbeddingSpec::Reference { group_size, n_independent } => {
                build_reference_embedding(*group_size, *n_independent)
            }
            EmbeddingSpec::Cohesion { alpha, group_size, n_independent } => {
                build_cohesion_embedding(*alpha, *group_size, *n_independent)
            }
            EmbeddingSpec::Absorption { beta, group_size, n_independent } => {
                build_absorption_embedding(*beta, *group_size, *n_independent)
            }
            EmbeddingSpec::Explicit { rows } => EmbeddingMatrix::from_rows(rows),
        }
    }

    fn group_layout(&self) -> Option<(usize, usize)> {
        match *self {
            EmbeddingSpec::Reference { group_size, n_independent }
            | EmbeddingSpec::Cohesion { group_size, n_independent, .. }
            | EmbeddingSpec::Absorption { group_size, n_independent, .. } => Some((group_size, n_independent)),
            EmbeddingSpec::Explicit { .. } => None,
        }
    }

    fn set_layout(&mut self, new_group: Option<usize>, new_independent: Option<usize>) -> Result<()> {
        match self {
            EmbeddingSpec::Reference { group_size, n_independent }
            | EmbeddingSpec::Cohesion { group_size, n_independent, .. }
            | EmbeddingSpec::Absorption { group_size, n_independent, .. } => {
                if let Some(g) = new_group {
                    *group_size = g;
                }
                if let Some(i) = new_independent {
                    *n_independent = i;
                }
                Ok(())
            }
            EmbeddingSpec::Explicit { .. } => Err(Error::usage(
                "group_size and n_independent do not apply to an explicit embedding",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub embedding: EmbeddingSpec,
    pub sigma_d: f64,
    pub sigma_f: f64,
    /// Candidates per choice problem.
    pub m: usize,
    /// Training candidates available to the trained rules.
    pub m_train: usize,
    pub rules: Vec<Rule>,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Draw one training set for all trials instead of one per trial.
    pub shared_training: bool,
    /// Agent read by the single-agent rule.
    pub single_agent_index: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            embedding: EmbeddingSpec::Reference {
                group_size: 20,
                n_independent: 4,
            },
            sigma_d: 0.1,
            sigma_f: 1.0,
            m: 20,
            m_train: 1000,
            rules: Rule::ALL.to_vec(),
            n_trials: DEFAULT_TRIALS,
            master_seed: DEFAULT_SEED,
            shared_training: false,
            single_agent_index: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::usage("n_trials must be at least 1"));
        }
        if self.m < 2 {
            return Err(Error::usage(format!("m must be at least 2, got {}", self.m)));
        }
        if self.rules.is_empty() {
            return Err(Error::usage("no rules requested"));
        }
        NoiseParams::new(self.sigma_d, self.sigma_f)?;
        let n = self.embedding.build()?.n_agents();
        if self.rules.contains(&Rule::SingleAgent) && self.single_agent_index >= n {
            return Err(Error::usage(format!(
                "single_agent index {} out of range for {n} agents",
                self.single_agent_index
            )));
        }
        Ok(())
    }

    fn needs_training(&self) -> bool {
        self.m_train > 0 && self.rules.iter().any(|r| r.is_trained())
    }
}

/// A scenario parameter that sweeps can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    GroupSize,
    NIndependent,
    M,
    SigmaD,
    SigmaF,
    Alpha,
    Beta,
}

impl Parameter {
    pub const ALL: [Parameter; 7] = [
        Parameter::GroupSize,
        Parameter::NIndependent,
        Parameter::M,
        Parameter::SigmaD,
        Parameter::SigmaF,
        Parameter::Alpha,
        Parameter::Beta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::GroupSize => "group_size",
            Parameter::NIndependent => "n_independent",
            Parameter::M => "m",
            Parameter::SigmaD => "sigma_d",
            Parameter::SigmaF => "sigma_f",
            Parameter::Alpha => "alpha",
            Parameter::Beta => "beta",
        }
    }

    /// Returns `config` with this parameter set to `value`. Setting `alpha`
    /// (resp. `beta`) switches the embedding to the cohesion (resp.
    /// absorption) layout with the same group sizes.
    pub fn apply(self, config: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut out = config.clone();
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::usage(format!("{} must be a non-negative integer, got {value}", self.name())))
            }
        };
        match self {
            Parameter::GroupSize => out.embedding.set_layout(Some(count()?), None)?,
            Parameter::NIndependent => out.embedding.set_layout(None, Some(count()?))?,
            Parameter::M => out.m = count()?,
            Parameter::SigmaD => out.sigma_d = value,
            Parameter::SigmaF => out.sigma_f = value,
            Parameter::Alpha | Parameter::Beta => {
                let (group_size, n_independent) = config.embedding.group_layout().ok_or_else(|| {
                    Error::usage(format!("{} does not apply to an explicit embedding", self.name()))
                })?;
                out.embedding = if self == Parameter::Alpha {
                    EmbeddingSpec::Cohesion { alpha: value, group_size, n_independent }
                } else {
                    EmbeddingSpec::Absorption { beta: value, group_size, n_independent }
                };
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown sweep parameter {s:?}")))
    }
}

/// What one rule did on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleTrial {
    pub rule: Rule,
    pub relative_utility: f64,
    /// The winner has the highest true utility.
    pub picked_best: bool,
    /// The rule fell back to a default (degenerate weights or a failed evaluation).
    pub fallback: bool,
    pub negative_weights: bool,
    pub k_hat: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_index: u64,
    pub rules: Vec<RuleTrial>,
}

fn stream(master_seed: u64, salt: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ salt);
    rng.set_stream(index);
    rng
}

/// A validated scenario with its embedding and model weights built once.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    embedding: EmbeddingMatrix,
    params: NoiseParams,
    model_weights: Option<WeightVector>,
    shared_training: Option<ScoreMatrix>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let embedding = config.embedding.build()?;
        let params = NoiseParams::new(config.sigma_d, config.sigma_f)?;
        let model_weights = config
            .rules
            .contains(&Rule::ModelAware)
            .then(|| model_weights(&embedding, params));
        let shared_training = if config.shared_training && config.needs_training() {
            let mut rng = stream(config.master_seed, SHARED_TRAINING_SALT, 0);
            Some(sample_candidates(&embedding, params, config.m_train, &mut rng)?.1)
        } else {
            None
        };
        Ok(Self {
            config,
            embedding,
            params,
            model_weights,
            shared_training,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn embedding(&self) -> &EmbeddingMatrix {
        &self.embedding
    }

    /// The choice problem of trial `trial_index`.
    pub fn sample(&self, trial_index: u64) -> Result<ChoiceProblem> {
        let c = &self.config;
        let mut rng = stream(c.master_seed, 0, trial_index);
        let per_trial_train = if c.needs_training() && self.shared_training.is_none() {
            c.m_train
        } else {
            0
        };
        let mut problem = sample_problem(&self.embedding, self.params, c.m, per_trial_train, &mut rng)?;
        if let Some(t) = &self.shared_training {
            problem.training_scores = Some(t.clone());
        }
        Ok(problem)
    }

    pub fn run_trial(&self, trial_index: u64) -> Result<TrialOutcome> {
        let problem = self.sample(trial_index)?;
        let best = problem
            .utilities
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut rule_rng = stream(self.config.master_seed, RULE_STREAM_SALT, trial_index);
        let mut rules = Vec::with_capacity(self.config.rules.len());
        for &rule in &self.config.rules {
            let mut negative_weights = false;
            let mut fallback = false;
            let mut k_hat = None;
            let s = &problem.scores;
            let training = problem.training_scores.as_ref();
            let evaluated: Result<AggregationOutcome> = match rule {
                Rule::RangeVoting => range_voting(s),
                Rule::ApprovalVoting => approval_voting(s),
                Rule::NashProduct => nash_product(s),
                Rule::SingleAgent => single_agent(s, self.config.single_agent_index),
                Rule::RandomWinner => random_winner(s.n_candidates(), &mut rule_rng),
                Rule::EmbeddedVoting | Rule::EmbeddedVotingTrained => {
                    let t = if rule.is_trained() { training } else { None };
                    embedded_voting(s, t).map(|ev| {
                        k_hat = Some(ev.diagnostics.k_hat);
                        ev.outcome
                    })
                }
                Rule::MaxLikelihood | Rule::MaxLikelihoodTrained => {
                    let t = if rule.is_trained() { training } else { None };
                    ml_rule(s, t).map(|ml| {
                        fallback = ml.used_fallback;
                        negative_weights = ml.negative_weights;
                        ml.outcome
                    })
                }
                Rule::ModelAware => {
                    let w = self.model_weights.as_ref().expect("model weights built for ga");
                    ga_rule_with_weights(s, w).or_else(|e| match e {
                        Error::DegenerateWeights { .. } => {
                            fallback = true;
                            ga_rule_with_weights(s, &WeightVector::uniform(s.n_agents()))
                        }
                        other => Err(other),
                    })
                }
            };
            let winner = match evaluated {
                Ok(o) => o.winner,
                Err(_) => {
                    fallback = true;
                    0
                }
            };
            rules.push(RuleTrial {
                rule,
                relative_utility: relative_utility(&problem.utilities, winner)?,
                picked_best: problem.utilities[winner] == best,
                fallback,
                negative_weights,
                k_hat,
            });
        }
        Ok(TrialOutcome { trial_index, rules })
    }

    /// Runs every trial (in parallel on the current rayon pool) and summarises per rule.
    pub fn run(&self) -> Result<Vec<RuleSummary>> {
        let trials = (0..self.config.n_trials as u64)
            .into_par_iter()
            .map(|t| self.run_trial(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(summarize(&self.config.rules, &trials))
    }
}

pub fn run_trial(config: &ScenarioConfig, trial_index: u64) -> Result<TrialOutcome> {
    Scenario::new(config.clone())?.run_trial(trial_index)
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<RuleSummary>> {
    Scenario::new(config.clone())?.run()
}

/// Aggregate performance of one rule over a scenario's trials.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSummary {
    pub rule: Rule,
    pub n_trials: usize,
    pub mean_relative_utility: f64,
    /// Sample standard deviation over `sqrt(n_trials)`; 0 for a single trial.
    pub std_error: f64,
    /// Fraction of trials where the truly best candidate was picked.
    pub accuracy: f64,
    pub fallback_count: u64,
    pub negative_weight_count: u64,
    pub k_hat_histogram: BTreeMap<usize, u64>,
}

pub fn summarize(rules: &[Rule], trials: &[TrialOutcome]) -> Vec<RuleSummary> {
    let n = trials.len();
    rules
        .iter()
        .enumerate()
        .map(|(r, &rule)| {
            let mut sum = 0.0;
            let mut best = 0u64;
            let mut fallback_count = 0;
            let mut negative_weight_count = 0;
            let mut k_hat_histogram = BTreeMap::new();
            for t in trials {
                let x = &t.rules[r];
                sum += x.relative_utility;
                best += u64::from(x.picked_best);
                fallback_count += u64::from(x.fallback);
                negative_weight_count += u64::from(x.negative_weights);
                if let Some(k) = x.k_hat {
                    *k_hat_histogram.entry(k).or_insert(0) += 1;
                }
            }
            let mean = sum / n as f64;
            let std_error = if n > 1 {
                let ss: f64 = trials
                    .iter()
                    .map(|t| (t.rules[r].relative_utility - mean).powi(2))
                    .sum();
                (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
            } else {
                0.0
            };
            RuleSummary {
                rule,
                n_trials: n,
                mean_relative_utility: mean,
                std_error,
                accuracy: best as f64 / n as f64,
                fallback_count,
                negative_weight_count,
                k_hat_histogram,
            }
        })
        .collect()
}

/// Results at one point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Parameter names joined by `;`, or `none` for a single scenario.
    pub parameter: String,
    /// Values in the same order, joined by `;`.
    pub value: String,
    pub seed: u64,
    pub summaries: Vec<RuleSummary>,
}

impl SweepResult {
    pub fn get(&self, rule: Rule) -> Option<&RuleSummary> {
        self.summaries.iter().find(|s| s.rule == rule)
    }

    /// Mean relative utility of `rule`; panics if the rule was not run.
    pub fn mean(&self, rule: Rule) -> f64 {
        self.get(rule)
            .unwrap_or_else(|| panic!("rule {rule} not in sweep result"))
            .mean_relative_utility
    }
}

/// One assignment of parameters; empty for the base scenario.
pub type SweepPoint = Vec<(Parameter, f64)>;

fn label(point: &[(Parameter, f64)]) -> (String, String) {
    if point.is_empty() {
        return ("none".into(), String::new());
    }
    let names: Vec<&str> = point.iter().map(|(p, _)| p.name()).collect();
    let values: Vec<String> = point.iter().map(|(_, v)| v.to_string()).collect();
    (names.join(";"), values.join(";"))
}

pub fn run_point(base: &ScenarioConfig, point: &[(Parameter, f64)]) -> Result<SweepResult> {
    let mut config = base.clone();
    for &(p, v) in point {
        config = p.apply(&config, v)?;
    }
    let (parameter, value) = label(point);
    Ok(SweepResult {
        parameter,
        value,
        seed: config.master_seed,
        summaries: run_scenario(&config)?,
    })
}

pub fn sweep_points(base: &ScenarioConfig, points: &[SweepPoint]) -> Result<Vec<SweepResult>> {
    // resolve every point before running anything
    for point in points {
        let mut config = base.clone();
        for &(p, v) in point {
            config = p.apply(&config, v)?;
        }
        config.validate()?;
    }
    points.iter().map(|p| run_point(base, p)).collect()
}

pub fn sweep(base: &ScenarioConfig, parameter: Parameter, values: &[f64]) -> Result<Vec<SweepResult>> {
    let points: Vec<SweepPoint> = values.iter().map(|&v| vec![(parameter, v)]).collect();
    sweep_points(base, &points)
}

/// The experiments of the evaluation, each a sweep around the reference scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6a,
    Fig6b,
}

impl Figure {
    pub const ALL: [Figure; 7] = [
        Figure::Fig1,
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6a,
        Figure::Fig6b,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6a => "fig6a",
            Figure::Fig6b => "fig6b",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Figure::Fig1 => "reference scenario",
            Figure::Fig2 => "size of the correlated group",
            Figure::Fig3 => "number of independent agents",
            Figure::Fig4 => "number of candidates",
            Figure::Fig5 => "noise intensities",
            Figure::Fig6a => "cohesion inside the group",
            Figure::Fig6b => "absorption of the independent agents",
        }
    }

    pub fn points(self) -> Vec<SweepPoint> {
        let single = |p: Parameter, vs: Vec<f64>| vs.into_iter().map(|v| vec![(p, v)]).collect();
        let tenths: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        match self {
            Figure::Fig1 => vec![vec![]],
            Figure::Fig2 => single(
                Parameter::GroupSize,
                std::iter::once(1.0).chain((1..=15).map(|i| 2.0 * i as f64)).collect(),
            ),
            Figure::Fig3 => single(
                Parameter::NIndependent,
                [0.0, 1.0].into_iter().chain((1..=10).map(|i| 2.0 * i as f64)).collect(),
            ),
            Figure::Fig4 => single(
                Parameter::M,
                [2.0, 3.0, 4.0].into_iter().chain((1..=10).map(|i| 5.0 * i as f64)).collect(),
            ),
            Figure::Fig5 => {
                let grid = [0.1, 1.0, 10.0];
                grid.iter()
                    .flat_map(|&d| grid.iter().map(move |&f| vec![(Parameter::SigmaD, d), (Parameter::SigmaF, f)]))
                    .collect()
            }
            Figure::Fig6a => single(Parameter::Alpha, tenths),
            Figure::Fig6b => single(Parameter::Beta, tenths),
        }
    }

    pub fn run(self, base: &ScenarioConfig) -> Result<Vec<SweepResult>> {
        sweep_points(base, &self.points())
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::Usage(format!("unknown figure {s:?}")))
    }
}
