//! Reference policies the learner is compared against.

use rand::{Rng, RngCore};

use super::{Agent, PeriodObservation, RateEstimator};
use crate::channel::SystemParams;
use crate::error::Result;
use crate::game::Proposal;

/// Greedy on empirical utility, uniformly random with probability
/// `epsilon`. A pair's empirical utility combines the learner's rate and
/// allocation estimates with the observed acceptance frequency, so a
/// rejection counts as earning `-theta`.
#[derive(Debug, Clone)]
pub struct EpsilonGreedyAgent {
    cu: usize,
    num_cus: usize,
    epsilon: f64,
    theta: f64,
    estimator: RateEstimator,
    proposals: Vec<u64>,
    acceptances: Vec<u64>,
}

impl EpsilonGreedyAgent {
    pub const DEFAULT_EPSILON: f64 = 0.1;

    pub fn new(cu: usize, num_cus: usize, direct_rate: f64, num_d2d: usize, epsilon: f64, sys: &SystemParams) -> Self {
        EpsilonGreedyAgent {
            cu,
            num_cus,
            epsilon,
            theta: sys.theta,
            estimator: RateEstimator::optimistic(direct_rate, num_d2d, sys),
            proposals: vec![0; num_d2d],
            acceptances: vec![0; num_d2d],
        }
    }

    /// Share of past proposals to `n` that were accepted; 1 before any.
    pub fn acceptance_rate(&self, n: usize) -> f64 {
        if self.proposals[n] == 0 {
            1.0
        } else {
            self.acceptances[n] as f64 / self.proposals[n] as f64
        }
    }

    /// Expected payoff of proposing to `n` under current estimates.
    pub fn empirical_utility(&self, n: usize) -> f64 {
        self.acceptance_rate(n) * self.estimator.cu_utility(n) - self.theta
    }

    pub fn estimator(&self) -> &RateEstimator {
        &self.estimator
    }

    pub fn estimator_mut(&mut self) -> &mut RateEstimator {
        &mut self.estimator
    }

    /// Pairs tied for the best estimated utility; empty when none is
    /// positive.
    pub fn greedy_set(&self) -> Vec<usize> {
        let utilities: Vec<f64> = (0..self.estimator.num_d2d()).map(|n| self.empirical_utility(n)).collect();
        let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if best <= 0.0 {
            return Vec::new();
        }
        (0..utilities.len()).filter(|&n| utilities[n] == best).collect()
    }
}

impl Agent for EpsilonGreedyAgent {
    fn act(&mut self, _t: u64, rng: &mut dyn RngCore) -> Option<Proposal> {
        let num_d2d = self.estimator.num_d2d();
        let target = if rng.random::<f64>() < self.epsilon {
            rng.random_range(0..num_d2d)
        } else {
            let greedy = self.greedy_set();
            if greedy.is_empty() {
                return None;
            }
            greedy[rng.random_range(0..greedy.len())]
        };
        Some(Proposal {
            target,
            alpha: self.estimator.own_alpha(target),
        })
    }

    fn observe(&mut self, obs: &PeriodObservation, _t: u64) -> Result<()> {
        obs.validate_for(self.cu, self.num_cus, self.estimator.num_d2d())?;
        if let Some(p) = obs.proposals[self.cu] {
            self.proposals[p.target] += 1;
            if let Some(sample) = obs.own_rate_sample {
                self.acceptances[p.target] += 1;
                self.estimator.record(p.target, sample);
            }
        }
        Ok(())
    }

    fn alpha_estimate(&self, n: usize) -> Option<f64> {
        Some(self.estimator.own_alpha(n))
    }
}

/// Uniformly random pair at the smallest allocation, every period.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    cu: usize,
    num_cus: usize,
    num_d2d: usize,
    alpha: f64,
}

impl RandomAgent {
    pub fn new(cu: usize, num_cus: usize, num_d2d: usize, sys: &SystemParams) -> Self {
        RandomAgent {
            cu,
            num_cus,
            num_d2d,
            alpha: sys.alpha_low,
        }
    }
}

impl Agent for RandomAgent {
    fn act(&mut self, _t: u64, rng: &mut dyn RngCore) -> Option<Proposal> {
        Some(Proposal {
            target: rng.random_range(0..self.num_d2d),
            alpha: self.alpha,
        })
    }

    fn observe(&mut self, obs: &PeriodObservation, _t: u64) -> Result<()> {
        obs.validate_for(self.cu, self.num_cus, self.num_d2d)
    }

    fn alpha_estimate(&self, _n: usize) -> Option<f64> {
        Some(self.alpha)
    }
}

/// Never cooperates.
#[derive(Debug, Clone, Default)]
pub struct NoncoopAgent;

impl Agent for NoncoopAgent {
    fn act(&mut self, _t: u64, _rng: &mut dyn RngCore) -> Option<Proposal> {
        None
    }

    fn observe(&mut self, _obs: &PeriodObservation, _t: u64) -> Result<()> {
        Ok(())
    }

    fn alpha_estimate(&self, _n: usize) -> Option<f64> {
        None
    }
}

/// Complete-information CU: proposes to a fixed partner at the true
/// bargained allocation.
#[derive(Debug, Clone)]
pub struct OracleAgent {
    partner: Option<usize>,
    true_alphas: Vec<f64>,
}

impl OracleAgent {
    pub fn new(partner: Option<usize>, true_alphas: Vec<f64>) -> Self {
        OracleAgent { partner, true_alphas }
    }
}

impl Agent for OracleAgent {
    fn act(&mut self, _t: u64, _rng: &mut dyn RngCore) -> Option<Proposal> {
        self.partner.map(|n| Proposal {
            target: n,
            alpha: self.true_alphas[n],
        })
    }

    fn observe(&mut self, _obs: &PeriodObservation, _t: u64) -> Result<()> {
        Ok(())
    }

    fn alpha_estimate(&self, n: usize) -> Option<f64> {
        Some(self.true_alphas[n])
    }
}
