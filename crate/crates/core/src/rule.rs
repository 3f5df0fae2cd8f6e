use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// The aggregation rules, addressable by their canonical short names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// Maximum likelihood with the true noise covariance.
    ModelAware,
    MaxLikelihoodTrained,
    EmbeddedVotingTrained,
    EmbeddedVoting,
    ApprovalVoting,
    NashProduct,
    RangeVoting,
    SingleAgent,
    MaxLikelihood,
    RandomWinner,
}

impl Rule {
    pub const ALL: [Rule; 10] = [
        Rule::ModelAware,
        Rule::MaxLikelihoodTrained,
        Rule::EmbeddedVotingTrained,
        Rule::EmbeddedVoting,
        Rule::ApprovalVoting,
        Rule::NashProduct,
        Rule::RangeVoting,
        Rule::SingleAgent,
        Rule::MaxLikelihood,
        Rule::RandomWinner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::RangeVoting => "rv",
            Rule::ApprovalVoting => "av",
            Rule::NashProduct => "np",
            Rule::SingleAgent => "sa",
            Rule::RandomWinner => "rw",
            Rule::EmbeddedVoting => "ev",
            Rule::EmbeddedVotingTrained => "ev+",
            Rule::MaxLikelihood => "ml",
            Rule::MaxLikelihoodTrained => "ml+",
            Rule::ModelAware => "ga",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Rule::RangeVoting => "range voting: sum of standardised scores",
            Rule::ApprovalVoting => "approval voting: count of scores above the agent's mean",
            Rule::NashProduct => "Nash product of scores shifted to mean 2",
            Rule::SingleAgent => "scores of a single agent",
            Rule::RandomWinner => "uniformly random candidate",
            Rule::EmbeddedVoting => "embedded voting on the current candidates",
            Rule::EmbeddedVotingTrained => "embedded voting with a training history",
            Rule::MaxLikelihood => "likelihood weights from the observed covariance",
            Rule::MaxLikelihoodTrained => "likelihood weights from a training history",
            Rule::ModelAware => "likelihood weights from the true noise model",
        }
    }

    /// Whether the rule reads training candidates.
    pub fn is_trained(self) -> bool {
        matches!(self, Rule::EmbeddedVotingTrained | Rule::MaxLikelihoodTrained)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Rule::ALL.iter().map(|r| r.name()).collect();
                Error::Usage(format!("unknown rule {s:?}, expected one of {}", known.join(", ")))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for r in Rule::ALL {
            assert_eq!(r.name().parse::<Rule>().unwrap(), r);
        }
        assert!("borda".parse::<Rule>().is_err());
        assert_eq!(Rule::ALL.iter().filter(|r| r.is_trained()).count(), 2);
    }
}
