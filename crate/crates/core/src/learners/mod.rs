//! Per-CU decision rules driven by period-level observations.
//!
//! Every agent plays one synchronous round per period: it announces a
//! proposal (or abstains), sees all proposals and every D2D pair's choice,
//! and, if accepted, one fading sample of its relayed rate.

mod baselines;
mod ebriq;
mod estimator;

pub use baselines::{EpsilonGreedyAgent, NoncoopAgent, OracleAgent, RandomAgent};
pub use ebriq::EbriqAgent;
pub use estimator::RateEstimator;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Proposal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningParams {
    /// Initial exploration probability.
    pub epsilon0: f64,
    /// Probability that an exploring CU announces its own allocation rather
    /// than the exploration allocation.
    pub zeta: f64,
    /// Inertia: probability of repeating the previous action.
    pub xi: f64,
    /// Number of past joint selections a CU best-replies against.
    pub memory_length: usize,
    /// Number of periods to simulate.
    pub horizon: u64,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            epsilon0: 0.1,
            zeta: 0.1,
            xi: 0.2,
            memory_length: 4,
            horizon: 10_000,
        }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("epsilon0", self.epsilon0), ("zeta", self.zeta), ("xi", self.xi)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {p}")));
            }
        }
        if self.memory_length == 0 {
            return Err(Error::Config("memory_length must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        Ok(())
    }

    /// `epsilon0 * t^(-1 / (M L))`.
    pub fn exploration_rate(&self, t: u64, num_cus: usize) -> f64 {
        let exponent = -1.0 / (num_cus * self.memory_length) as f64;
        self.epsilon0 * (t as f64).powf(exponent)
    }
}

/// What one CU learns at the end of a period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodObservation {
    /// Every CU's announced proposal, `None` for abstention.
    pub proposals: Vec<Option<Proposal>>,
    /// The CU each D2D pair accepted.
    pub choices: Vec<Option<usize>>,
    /// Relayed-rate sample, present exactly when this CU was accepted.
    pub own_rate_sample: Option<f64>,
}

impl PeriodObservation {
    /// Checks shape and that the sample is present iff `cu` was accepted.
    pub fn validate_for(&self, cu: usize, num_cus: usize, num_d2d: usize) -> Result<()> {
        if self.proposals.len() != num_cus || self.choices.len() != num_d2d {
            return Err(Error::Structural(format!(
                "observation has {} proposals and {} choices, expected {num_cus} and {num_d2d}",
                self.proposals.len(),
                self.choices.len()
            )));
        }
        if let Some(p) = self.proposals.iter().flatten().find(|p| p.target >= num_d2d) {
            return Err(Error::Structural(format!("proposal targets unknown D2D {}", p.target)));
        }
        let accepted = self.proposals[cu].is_some_and(|p| self.choices[p.target] == Some(cu));
        if accepted != self.own_rate_sample.is_some() {
            return Err(Error::Structural(format!(
                "CU {cu} accepted = {accepted} but rate sample present = {}",
                self.own_rate_sample.is_some()
            )));
        }
        Ok(())
    }
}

/// A CU decision rule.
pub trait Agent: Send {
    /// Proposal for period `t` (periods start at 1).
    fn act(&mut self, t: u64, rng: &mut dyn RngCore) -> Option<Proposal>;

    /// Absorbs the outcome of period `t`.
    fn observe(&mut self, obs: &PeriodObservation, t: u64) -> Result<()>;

    /// Current estimate of the bargained allocation with D2D pair `n`.
    fn alpha_estimate(&self, n: usize) -> Option<f64>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exploration_schedule() {
        let p = LearningParams::default();
        assert_eq!(p.exploration_rate(1, 2), 0.1);
        assert!((p.exploration_rate(256, 2) - 0.05).abs() < 1e-15);
        assert!(p.exploration_rate(1000, 4) < p.exploration_rate(999, 4));
    }

    #[test]
    fn invalid_learning_params() {
        let mut p = LearningParams::default();
        p.zeta = 1.0;
        assert!(p.validate().unwrap_err().to_string().contains("zeta"));
        let mut p = LearningParams::default();
        p.memory_length = 0;
        assert!(p.validate().is_err());
    }
}
