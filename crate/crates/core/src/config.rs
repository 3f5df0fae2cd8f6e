//! Scenario files.
//!
//! A scenario is a flat TOML document; every key is optional and defaults to
//! the reference scenario:
//!
//! ```toml
//! embedding = "reference"   # reference | cohesion | absorption | explicit
//! group_size = 20
//! n_independent = 4
//! sigma_d = 0.1
//! sigma_f = 1.0
//! m = 20
//! m_train = 1000
//! rules = ["rv", "ev"]
//! n_trials = 10000
//! seed = 42
//! ```
//!
//! `alpha` selects the cohesion layout, `beta` the absorption layout, and
//! `matrix = [[1.0, 0.0], ...]` an explicit embedding with unit-norm rows.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::{EmbeddingSpec, ScenarioConfig};
use crate::rule::Rule;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    embedding: Option<String>,
    group_size: Option<usize>,
    n_independent: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
    matrix: Option<Vec<Vec<f64>>>,
    sigma_d: Option<f64>,
    sigma_f: Option<f64>,
    m: Option<usize>,
    m_train: Option<usize>,
    rules: Option<Vec<String>>,
    n_trials: Option<usize>,
    seed: Option<u64>,
    shared_training: Option<bool>,
    single_agent: Option<usize>,
}

/// 1-based line where `key` is assigned, if any.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn key_error(text: &str, key: &str, msg: impl fmt::Display) -> Error {
    match line_of(text, key) {
        Some(line) => Error::Config(format!("line {line}, key `{key}`: {msg}")),
        None => Error::Config(format!("key `{key}`: {msg}")),
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
    let defaults = ScenarioConfig::default();
    let (default_group, default_independent) = (20, 4);
    let group_size = raw.group_size.unwrap_or(default_group);
    let n_independent = raw.n_independent.unwrap_or(default_independent);

    let kind = match raw.embedding.as_deref() {
        Some(k) => k.to_owned(),
        None if raw.matrix.is_some() => "explicit".into(),
        None if raw.alpha.is_some() => "cohesion".into(),
        None if raw.beta.is_some() => "absorption".into(),
        None => "reference".into(),
    };
    let stray = |key: &str, present: bool| -> Result<()> {
        if present {
            Err(key_error(text, key, format!("not used by the {kind} embedding")))
        } else {
            Ok(())
        }
    };
    let embedding = match kind.as_str() {
        "reference" => {
            stray("alpha", raw.alpha.is_some())?;
            stray("beta", raw.beta.is_some())?;
            stray("matrix", raw.matrix.is_some())?;
            EmbeddingSpec::Reference { group_size, n_independent }
        }
        "cohesion" => {
            stray("beta", raw.beta.is_some())?;
            stray("matrix", raw.matrix.is_some())?;
            let alpha = raw.alpha.unwrap_or(1.0);
            EmbeddingSpec::Cohesion { alpha, group_size, n_independent }
        }
        "absorption" => {
            stray("alpha", raw.alpha.is_some())?;
            stray("matrix", raw.matrix.is_some())?;
            let beta = raw.beta.unwrap_or(0.0);
            EmbeddingSpec::Absorption { beta, group_size, n_independent }
        }
        "explicit" => {
            for key in ["alpha", "beta", "group_size", "n_independent"] {
                let present = match key {
                    "alpha" => raw.alpha.is_some(),
                    "beta" => raw.beta.is_some(),
                    "group_size" => raw.group_size.is_some(),
                    _ => raw.n_independent.is_some(),
                };
                stray(key, present)?;
            }
            let rows = raw
                .matrix
                .ok_or_else(|| key_error(text, "embedding", "explicit embedding needs a `matrix`"))?;
            EmbeddingSpec::Explicit { rows }
        }
        other => {
            return Err(key_error(
                text,
                "embedding",
                format!("unknown embedding {other:?}, expected reference, cohesion, absorption or explicit"),
            ))
        }
    };
    if let Err(e) = embedding.build() {
        let key = if matches!(embedding, EmbeddingSpec::Explicit { .. }) { "matrix" } else { "embedding" };
        return Err(key_error(text, key, e));
    }

    let rules = match raw.rules {
        Some(names) => names
            .iter()
            .map(|n| n.parse::<Rule>().map_err(|e| key_error(text, "rules", e)))
            .collect::<Result<Vec<_>>>()?,
        None => defaults.rules.clone(),
    };

    let config = ScenarioConfig {
        embedding,
        sigma_d: raw.sigma_d.unwrap_or(defaults.sigma_d),
        sigma_f: raw.sigma_f.unwrap_or(defaults.sigma_f),
        m: raw.m.unwrap_or(defaults.m),
        m_train: raw.m_train.unwrap_or(defaults.m_train),
        rules,
        n_trials: raw.n_trials.unwrap_or(defaults.n_trials),
        master_seed: raw.seed.unwrap_or(defaults.master_seed),
        shared_training: raw.shared_training.unwrap_or(false),
        single_agent_index: raw.single_agent.unwrap_or(0),
    };
    config.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_reference_scenario() {
        assert_eq!(parse_config("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn minimal_config() {
        let c = parse_config("rules = [\"rv\"]\nn_trials = 10\n").unwrap();
        assert_eq!(c.rules, vec![Rule::RangeVoting]);
        assert_eq!(c.n_trials, 10);
        assert_eq!(c.m, 20);
    }

    #[test]
    fn layouts_are_inferred() {
        let c = parse_config("alpha = 0.5").unwrap();
        assert_eq!(c.embedding, EmbeddingSpec::Cohesion { alpha: 0.5, group_size: 20, n_independent: 4 });
        let c = parse_config("beta = 0.25\ngroup_size = 3").unwrap();
        assert_eq!(c.embedding, EmbeddingSpec::Absorption { beta: 0.25, group_size: 3, n_independent: 4 });
        let c = parse_config("matrix = [[1.0, 0.0], [0.0, 1.0]]").unwrap();
        assert!(matches!(c.embedding, EmbeddingSpec::Explicit { .. }));
    }

    #[test]
    fn bad_matrix_row_is_named() {
        let err = parse_config("rules = [\"rv\"]\nmatrix = [[1.0, 0.0], [0.5, 0.5]]\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("row 1"), "{msg}");
    }

    #[test]
    fn errors_name_key_and_line() {
        let msg = parse_config("m = 20\ngroup_size = \"big\"\n").unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("group_size"), "{msg}");

        let msg = parse_config("colour = 3\n").unwrap_err().to_string();
        assert!(msg.contains("colour"), "{msg}");

        let msg = parse_config("sigma_d = 0.1\nrules = [\"rv\", \"borda\"]\n").unwrap_err().to_string();
        assert!(msg.contains("line 2") && msg.contains("borda"), "{msg}");

        let msg = parse_config("embedding = \"reference\"\nalpha = 0.3\n").unwrap_err().to_string();
        assert!(msg.contains("alpha"), "{msg}");

        assert!(parse_config("m = 1").is_err());
        assert!(parse_config("embedding = \"star\"").is_err());
    }
}
