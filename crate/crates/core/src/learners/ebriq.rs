//! Better reply with inertia over estimated utilities, combined with a
//! running-mean estimator of relayed rates.

use std::collections::VecDeque;

use rand::{Rng, RngCore};

use super::{Agent, LearningParams, PeriodObservation, RateEstimator};
use crate::channel::SystemParams;
use crate::error::Result;
use crate::game::Proposal;

#[derive(Debug, Clone)]
pub struct EbriqAgent {
    cu: usize,
    num_cus: usize,
    estimator: RateEstimator,
    /// `announced[k][n]`: last non-exploring allocation CU k offered pair n.
    announced: Vec<Vec<f64>>,
    /// Most recent joint D2D selections, oldest first.
    memory: VecDeque<Vec<Option<usize>>>,
    last_action: Option<usize>,
    bias: Vec<f64>,
    params: LearningParams,
    sys: SystemParams,
}

impl EbriqAgent {
    /// `bias` is the public tie-break rule D2D pairs apply.
    pub fn new(
        cu: usize,
        direct_rate: f64,
        num_d2d: usize,
        bias: Vec<f64>,
        params: LearningParams,
        sys: SystemParams,
    ) -> Self {
        let num_cus = bias.len();
        assert!(cu < num_cus, "CU {cu} out of range for {num_cus} biases");
        EbriqAgent {
            cu,
            num_cus,
            estimator: RateEstimator::optimistic(direct_rate, num_d2d, &sys),
            announced: vec![vec![sys.alpha_low; num_d2d]; num_cus],
            memory: VecDeque::with_capacity(params.memory_length + 1),
            last_action: None,
            bias,
            params,
            sys,
        }
    }

    pub fn estimator(&self) -> &RateEstimator {
        &self.estimator
    }

    pub fn announced_alpha(&self, other: usize, n: usize) -> f64 {
        self.announced[other][n]
    }

    pub fn memory(&self) -> impl Iterator<Item = &[Option<usize>]> {
        self.memory.iter().map(Vec::as_slice)
    }

    pub fn last_action(&self) -> Option<usize> {
        self.last_action
    }

    fn num_d2d(&self) -> usize {
        self.estimator.num_d2d()
    }

    /// Estimated payoff of `candidate` if the others select as in
    /// `selections` (this CU's own entry is ignored) and offer their last
    /// announced allocations.
    pub fn estimated_utility(&self, candidate: Option<usize>, selections: &[Option<usize>]) -> f64 {
        let Some(n) = candidate else { return 0.0 };
        let own_key = self.estimator.own_alpha(n) + self.bias[self.cu];
        let wins = selections.iter().enumerate().all(|(k, &sel)| {
            if k == self.cu || sel != Some(n) {
                return true;
            }
            let key = self.announced[k][n] + self.bias[k];
            own_key > key || (own_key == key && self.cu < k)
        });
        if wins {
            self.estimator.cu_utility(n) - self.sys.theta
        } else {
            -self.sys.theta
        }
    }

    /// Mean estimated payoff of `candidate` against the remembered selections.
    pub fn memory_average(&self, candidate: Option<usize>) -> f64 {
        if self.memory.is_empty() {
            return self.estimated_utility(candidate, &[]);
        }
        let total: f64 = self.memory.iter().map(|sel| self.estimated_utility(candidate, sel)).sum();
        total / self.memory.len() as f64
    }

    /// Actions that strictly beat the last action on the memory average.
    pub fn better_replies(&self) -> Vec<Option<usize>> {
        let baseline = self.memory_average(self.last_action);
        std::iter::once(None)
            .chain((0..self.num_d2d()).map(Some))
            .filter(|&a| a != self.last_action && self.memory_average(a) > baseline)
            .collect()
    }

    fn proposal(&self, target: Option<usize>) -> Option<Proposal> {
        target.map(|n| Proposal {
            target: n,
            alpha: self.estimator.own_alpha(n),
        })
    }
}

impl Agent for EbriqAgent {
    fn act(&mut self, t: u64, rng: &mut dyn RngCore) -> Option<Proposal> {
        if t < 2 {
            // Initialization period.
            return None;
        }
        let epsilon = self.params.exploration_rate(t, self.num_cus);
        if rng.random::<f64>() < epsilon {
            let n = rng.random_range(0..self.num_d2d());
            let alpha = if rng.random::<f64>() < self.params.zeta {
                self.estimator.own_alpha(n)
            } else {
                self.sys.exploration_alpha()
            };
            return Some(Proposal { target: n, alpha });
        }
        if rng.random::<f64>() < self.params.xi {
            return self.proposal(self.last_action);
        }
        let better = self.better_replies();
        let target = if better.is_empty() {
            self.last_action
        } else {
            better[rng.random_range(0..better.len())]
        };
        self.proposal(target)
    }

    fn observe(&mut self, obs: &PeriodObservation, _t: u64) -> Result<()> {
        obs.validate_for(self.cu, self.num_cus, self.num_d2d())?;
        let own = obs.proposals[self.cu];
        if let (Some(p), Some(sample)) = (own, obs.own_rate_sample) {
            self.estimator.record(p.target, sample);
        }
        for (k, p) in obs.proposals.iter().enumerate() {
            if let Some(p) = p {
                if k != self.cu && p.alpha <= self.sys.alpha_high {
                    self.announced[k][p.target] = p.alpha;
                }
            }
        }
        self.memory
            .push_back(obs.proposals.iter().map(|p| p.map(|p| p.target)).collect());
        while self.memory.len() > self.params.memory_length {
            self.memory.pop_front();
        }
        self.last_action = own.map(|p| p.target);
        Ok(())
    }

    fn alpha_estimate(&self, n: usize) -> Option<f64> {
        Some(self.estimator.own_alpha(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent() -> EbriqAgent {
        EbriqAgent::new(
            0,
            1.0,
            2,
            vec![2e-9, 1e-9],
            LearningParams::default(),
            SystemParams::default(),
        )
    }

    fn obs(proposals: Vec<Option<Proposal>>, choices: Vec<Option<usize>>, sample: Option<f64>) -> PeriodObservation {
        PeriodObservation {
            proposals,
            choices,
            own_rate_sample: sample,
        }
    }

    #[test]
    fn abstaining_is_worth_zero() {
        assert_eq!(agent().estimated_utility(None, &[None, Some(0)]), 0.0);
    }

    #[test]
    fn uncontested_estimate() {
        let sys = SystemParams::default();
        let mut a = agent();
        a.estimator = RateEstimator::with_initial(1.0, vec![2.0, 2.0], &sys);
        assert_eq!(a.estimator.own_alpha(0), 0.25);
        let u = a.estimated_utility(Some(0), &[Some(0), Some(1)]);
        assert!((u - 0.499).abs() < 1e-12);
    }

    #[test]
    fn outbid_rival_means_rejection() {
        let sys = SystemParams::default();
        let mut a = agent();
        a.estimator = RateEstimator::with_initial(1.0, vec![2.0, 2.0], &sys);
        a.announced[1][0] = 0.4;
        assert_eq!(a.estimated_utility(Some(0), &[Some(0), Some(0)]), -sys.theta);
    }

    #[test]
    fn first_cooperation_updates_estimate() {
        let sys = SystemParams::default();
        let mut a = agent();
        a.estimator = RateEstimator::with_initial(1.0, vec![0.0, 0.0], &sys);
        let p = Some(Proposal { target: 0, alpha: 0.1 });
        a.observe(&obs(vec![p, None], vec![Some(0), None], Some(2.0)), 2).unwrap();
        assert_eq!(a.estimator.estimate(0), 1.0);
        assert_eq!(a.last_action(), Some(0));
    }

    #[test]
    fn rejection_leaves_estimates_alone() {
        let mut a = agent();
        let before = a.estimator.estimates().to_vec();
        let mine = Some(Proposal { target: 1, alpha: 0.2 });
        let theirs = Some(Proposal { target: 1, alpha: 0.3 });
        a.observe(&obs(vec![mine, theirs], vec![None, Some(1)], None), 2).unwrap();
        assert_eq!(a.estimator.estimates(), before.as_slice());
        assert_eq!(a.announced_alpha(1, 1), 0.3);
    }

    #[test]
    fn exploration_offers_are_not_recorded() {
        let mut a = agent();
        let explorer = Some(Proposal {
            target: 0,
            alpha: SystemParams::default().exploration_alpha(),
        });
        a.observe(&obs(vec![None, explorer], vec![Some(1), None], None), 2).unwrap();
        assert_eq!(a.announced_alpha(1, 0), 0.1);
    }

    #[test]
    fn inconsistent_observations_fail() {
        let mut a = agent();
        let p = Some(Proposal { target: 0, alpha: 0.2 });
        assert!(a.observe(&obs(vec![p, None], vec![Some(0), None], None), 2).is_err());
        assert!(a.observe(&obs(vec![p, None], vec![None, None], Some(1.0)), 2).is_err());
        assert!(a.observe(&obs(vec![p], vec![Some(0), None], Some(1.0)), 2).is_err());
    }

    #[test]
    fn memory_keeps_last_l_selections() {
        let mut a = agent();
        for t in 0..7 {
            let target = t % 2;
            let other = Some(Proposal { target, alpha: 0.2 });
            a.observe(&obs(vec![None, other], vec![None; 2], None), t as u64 + 2).unwrap();
        }
        let memory: Vec<_> = a.memory().map(<[_]>::to_vec).collect();
        assert_eq!(memory.len(), 4);
        assert_eq!(memory[3], vec![None, Some(0)]);
        assert_eq!(memory[0], vec![None, Some(1)]);
    }

    #[test]
    fn exploration_announcement() {
        // With epsilon0 close to one and zeta close to zero, nearly every
        // proposal explores at alpha_high + theta_prime.
        let params = LearningParams {
            epsilon0: 0.999_999,
            zeta: 1e-9,
            ..LearningParams::default()
        };
        let mut a = EbriqAgent::new(0, 1.0, 2, vec![0.0, 0.0], params, SystemParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = a.act(2, &mut rng).unwrap();
        assert_eq!(p.alpha, 0.5 + 1e-3);
        assert_eq!(a.act(1, &mut rng), None);
    }
}
