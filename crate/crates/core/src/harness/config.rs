use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{SystemParams, TopologyParams};
use crate::error::{Error, Result};
use crate::learners::LearningParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Ebriq,
    EpsilonGreedy,
    Random,
    Noncoop,
    GsOracle,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Ebriq,
        Policy::EpsilonGreedy,
        Policy::Random,
        Policy::Noncoop,
        Policy::GsOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Ebriq => "ebriq",
            Policy::EpsilonGreedy => "epsilon_greedy",
            Policy::Random => "random",
            Policy::Noncoop => "noncoop",
            Policy::GsOracle => "gs_oracle",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

/// How period throughput is measured. Learners always see fading samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThroughputMode {
    /// Fresh fading realization every period.
    #[default]
    Sampled,
    /// Ergodic rates of the realized matching and allocations.
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentParams {
    pub policy: Policy,
    pub num_replications: usize,
    pub seed: u64,
    /// Reuse one topology for every replication instead of redrawing.
    pub fixed_topology: bool,
    pub throughput: ThroughputMode,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            policy: Policy::Ebriq,
            num_replications: 200,
            seed: 1,
            fixed_topology: false,
            throughput: ThroughputMode::Sampled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub topology: TopologyParams,
    pub system: SystemParams,
    pub learning: LearningParams,
    pub experiment: ExperimentParams,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.system.validate()?;
        self.learning.validate()?;
        if self.experiment.num_replications == 0 {
            return Err(Error::Config("num_replications must be at least 1".into()));
        }
        Ok(())
    }

    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let mut config = ExperimentConfig::default();
        config.experiment.policy = Policy::GsOracle;
        config.experiment.fixed_topology = true;
        let text = config.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), config);
    }

    #[test]
    fn partial_files_use_defaults() {
        let config = ExperimentConfig::from_toml_str("[experiment]\npolicy = \"random\"\nseed = 9\n").unwrap();
        assert_eq!(config.experiment.policy, Policy::Random);
        assert_eq!(config.experiment.seed, 9);
        assert_eq!(config.topology, TopologyParams::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["[experiment]\nsede = 3\n", "[nonsense]\n", "[system]\nalpha_lo = 0.1\n"] {
            assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[experiment]\nnum_replications = 0\n",
            "[learning]\nxi = 1.5\n",
            "[system]\nalpha_low = 0.6\n",
            "[topology]\nnum_cus = 0\n",
            "[experiment]\npolicy = \"greedy\"\n",
        ] {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
    }
}
