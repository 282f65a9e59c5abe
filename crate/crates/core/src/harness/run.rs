use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Policy, ThroughputMode};
use crate::channel::{
    generate_topology, sample_d2d_rate, sample_direct_rate, sample_relay_rate, true_rates, RateTable, SystemParams,
    Topology,
};
use crate::error::Result;
use crate::game::{choice, induced_matching, ActionProfile, Proposal};
use crate::learners::{
    Agent, EbriqAgent, EpsilonGreedyAgent, LearningParams, NoncoopAgent, OracleAgent, PeriodObservation, RandomAgent,
};
use crate::matching::{build_preferences, gale_shapley, is_stable, Matching, PreferenceProfile};

/// Share of the horizon, counted from the end, treated as steady state.
pub const STEADY_STATE_FRACTION: f64 = 0.1;

/// Replications simulated concurrently before their traces are folded in.
const CHUNK: usize = 64;

/// One cell as the harness sees it: geometry, ergodic rates and the
/// complete-information preferences the agents never observe.
#[derive(Debug, Clone)]
pub struct Environment {
    pub topology: Topology,
    pub rates: RateTable,
    pub prefs: PreferenceProfile,
    pub sys: SystemParams,
    pub throughput: ThroughputMode,
}

impl Environment {
    pub fn new(topology: Topology, sys: SystemParams, throughput: ThroughputMode) -> Result<Self> {
        let rates = true_rates(&topology, &sys)?;
        let prefs = build_preferences(&rates, &sys)?;
        Ok(Environment {
            topology,
            rates,
            prefs,
            sys,
            throughput,
        })
    }

    pub fn num_cus(&self) -> usize {
        self.rates.num_cus()
    }

    pub fn num_d2d(&self) -> usize {
        self.rates.num_d2d()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodMetrics {
    pub t: u64,
    /// CU plus D2D throughput.
    pub system_throughput: f64,
    pub cu_throughput: f64,
    pub d2d_throughput: f64,
    /// Whether the matching induced by the selected targets is stable under
    /// the true preferences.
    pub sm_indicator: bool,
    /// The pairs actually formed this period.
    pub matching: Matching,
    /// `(m, n, alpha / alpha*)` for every formed pair, using CU m's current
    /// allocation for n.
    pub alpha_ratios: Vec<(usize, usize, f64)>,
}

impl PeriodMetrics {
    pub fn mean_alpha_ratio(&self) -> Option<f64> {
        if self.alpha_ratios.is_empty() {
            return None;
        }
        Some(self.alpha_ratios.iter().map(|r| r.2).sum::<f64>() / self.alpha_ratios.len() as f64)
    }

    pub fn record(&self) -> PeriodRecord {
        PeriodRecord {
            system_throughput: self.system_throughput,
            cu_throughput: self.cu_throughput,
            d2d_throughput: self.d2d_throughput,
            sm_indicator: self.sm_indicator,
            alpha_ratio: self.mean_alpha_ratio().unwrap_or(f64::NAN),
        }
    }
}

/// Compact per-period trace entry. `alpha_ratio` is NaN when nobody paired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodRecord {
    pub system_throughput: f64,
    pub cu_throughput: f64,
    pub d2d_throughput: f64,
    pub sm_indicator: bool,
    pub alpha_ratio: f64,
}

/// One synchronous round: proposals, choices, rate draws, feedback.
pub fn run_period(
    env: &Environment,
    agents: &mut [Box<dyn Agent>],
    t: u64,
    rng: &mut ChaCha8Rng,
) -> Result<PeriodMetrics> {
    let (num_cus, num_d2d) = (env.num_cus(), env.num_d2d());
    let bias = env.prefs.bias();
    let proposals: Vec<Option<Proposal>> = agents.iter_mut().map(|a| a.act(t, rng)).collect();
    let choices: Vec<Option<usize>> = (0..num_d2d).map(|n| choice(n, &proposals, bias)).collect();

    let mut cu_throughput = 0.0;
    let mut d2d_throughput = 0.0;
    let mut samples = vec![None; num_cus];
    let mut pairs = Vec::new();
    for m in 0..num_cus {
        let accepted = proposals[m].filter(|p| choices[p.target] == Some(m));
        match accepted {
            Some(p) => {
                let relay = sample_relay_rate(m, p.target, &env.topology, &env.sys, rng);
                let d2d = sample_d2d_rate(p.target, &env.topology, &env.sys, rng);
                samples[m] = Some(relay);
                pairs.push((m, p.target));
                let (relay, d2d) = match env.throughput {
                    ThroughputMode::Sampled => (relay, d2d),
                    ThroughputMode::Expected => (env.rates.relay(m, p.target), env.rates.d2d(p.target)),
                };
                cu_throughput += (1.0 - p.alpha) * relay;
                d2d_throughput += p.alpha * d2d;
            }
            None => {
                let direct = sample_direct_rate(m, &env.topology, &env.sys, rng);
                cu_throughput += match env.throughput {
                    ThroughputMode::Sampled => direct,
                    ThroughputMode::Expected => env.rates.direct(m),
                };
            }
        }
    }

    let mut obs = PeriodObservation {
        proposals,
        choices,
        own_rate_sample: None,
    };
    for (m, agent) in agents.iter_mut().enumerate() {
        obs.own_rate_sample = samples[m];
        agent.observe(&obs, t)?;
    }

    let targets = ActionProfile::new(obs.proposals.iter().map(|p| p.map(|p| p.target)).collect(), num_d2d)?;
    let sm_indicator = is_stable(&induced_matching(&targets, &env.prefs), &env.prefs);
    let alpha_ratios = pairs
        .iter()
        .filter_map(|&(m, n)| {
            let alpha = agents[m].alpha_estimate(n)?;
            Some((m, n, alpha / env.prefs.alpha(m, n)))
        })
        .collect();
    Ok(PeriodMetrics {
        t,
        system_throughput: cu_throughput + d2d_throughput,
        cu_throughput,
        d2d_throughput,
        sm_indicator,
        matching: Matching::from_pairs(num_cus, num_d2d, &pairs)?,
        alpha_ratios,
    })
}

/// Fresh agents of one policy for the given cell.
pub fn build_agents(policy: Policy, env: &Environment, learning: &LearningParams) -> Vec<Box<dyn Agent>> {
    let (num_cus, num_d2d) = (env.num_cus(), env.num_d2d());
    let sys = &env.sys;
    match policy {
        Policy::Ebriq => (0..num_cus)
            .map(|m| {
                Box::new(EbriqAgent::new(
                    m,
                    env.rates.direct(m),
                    num_d2d,
                    env.prefs.bias().to_vec(),
                    learning.clone(),
                    sys.clone(),
                )) as Box<dyn Agent>
            })
            .collect(),
        Policy::EpsilonGreedy => (0..num_cus)
            .map(|m| {
                Box::new(EpsilonGreedyAgent::new(
                    m,
                    num_cus,
                    env.rates.direct(m),
                    num_d2d,
                    EpsilonGreedyAgent::DEFAULT_EPSILON,
                    sys,
                )) as Box<dyn Agent>
            })
            .collect(),
        Policy::Random => (0..num_cus)
            .map(|m| Box::new(RandomAgent::new(m, num_cus, num_d2d, sys)) as Box<dyn Agent>)
            .collect(),
        Policy::Noncoop => (0..num_cus).map(|_| Box::new(NoncoopAgent) as Box<dyn Agent>).collect(),
        Policy::GsOracle => {
            let mu = gale_shapley(&env.prefs);
            (0..num_cus)
                .map(|m| {
                    Box::new(OracleAgent::new(mu.cu_partner(m), env.prefs.alphas()[m].clone())) as Box<dyn Agent>
                })
                .collect()
        }
    }
}

/// Topology and dynamics generators of replication `index`. Streams are
/// split from the experiment seed, so every policy sees the same cells.
pub fn replication_rngs(config: &ExperimentConfig, index: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let stream = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.experiment.seed);
        rng.set_stream(s);
        rng
    };
    let index = index as u64;
    let topology = if config.experiment.fixed_topology {
        stream(0)
    } else {
        stream(2 * index + 1)
    };
    (topology, stream(2 * index + 2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub index: usize,
    /// Steady-state means.
    pub window_throughput: f64,
    pub window_cu_throughput: f64,
    pub window_d2d_throughput: f64,
    pub window_sm_fraction: f64,
    /// Times each `(m, n)` was paired.
    pub visits: Vec<Vec<u64>>,
    /// Each CU's allocation for each pair at the end of the horizon.
    pub final_alphas: Vec<Vec<Option<f64>>>,
    pub true_alphas: Vec<Vec<f64>>,
    /// Stable matching found by deferred acceptance on the true preferences.
    pub oracle_matching: Matching,
}

/// First period of the steady-state window.
fn window_start(horizon: u64) -> u64 {
    let len = ((horizon as f64) * STEADY_STATE_FRACTION).ceil().max(1.0) as u64;
    horizon - len.min(horizon) + 1
}

/// Runs replication `index` and returns its summary and full trace.
pub fn run_replication(config: &ExperimentConfig, index: usize) -> Result<(ReplicationSummary, Vec<PeriodRecord>)> {
    config.validate()?;
    let (mut topo_rng, mut rng) = replication_rngs(config, index);
    let topology = generate_topology(&config.topology, &mut topo_rng)?;
    let env = Environment::new(topology, config.system.clone(), config.experiment.throughput)?;
    let mut agents = build_agents(config.experiment.policy, &env, &config.learning);

    let horizon = config.learning.horizon;
    let start = window_start(horizon);
    let (num_cus, num_d2d) = (env.num_cus(), env.num_d2d());
    let mut visits = vec![vec![0u64; num_d2d]; num_cus];
    let mut trace = Vec::with_capacity(horizon as usize);
    let (mut sys_sum, mut cu_sum, mut d2d_sum, mut sm_count) = (0.0, 0.0, 0.0, 0u64);
    for t in 1..=horizon {
        let metrics = run_period(&env, &mut agents, t, &mut rng)?;
        for (m, n) in metrics.matching.pairs() {
            visits[m][n] += 1;
        }
        if t >= start {
            sys_sum += metrics.system_throughput;
            cu_sum += metrics.cu_throughput;
            d2d_sum += metrics.d2d_throughput;
            sm_count += u64::from(metrics.sm_indicator);
        }
        trace.push(metrics.record());
    }
    let window = (horizon - start + 1) as f64;
    let final_alphas = agents
        .iter()
        .map(|a| (0..num_d2d).map(|n| a.alpha_estimate(n)).collect())
        .collect();
    let summary = ReplicationSummary {
        index,
        window_throughput: sys_sum / window,
        window_cu_throughput: cu_sum / window,
        window_d2d_throughput: d2d_sum / window,
        window_sm_fraction: sm_count as f64 / window,
        visits,
        final_alphas,
        true_alphas: env.prefs.alphas().to_vec(),
        oracle_matching: gale_shapley(&env.prefs),
    };
    Ok((summary, trace))
}

/// Means across replications for one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodAggregate {
    pub t: u64,
    pub mean_throughput: f64,
    pub mean_cu_throughput: f64,
    pub mean_d2d_throughput: f64,
    pub sm_fraction: f64,
    /// Mean over replications that formed at least one pair; NaN if none did.
    pub mean_alpha_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub periods: Vec<PeriodAggregate>,
    pub replications: Vec<ReplicationSummary>,
}

impl ExperimentResult {
    pub fn policy(&self) -> Policy {
        self.config.experiment.policy
    }
}

#[derive(Clone, Copy, Default)]
struct Accumulator {
    throughput: f64,
    cu: f64,
    d2d: f64,
    sm: u64,
    ratio: f64,
    ratio_count: u64,
}

/// Runs every replication, in parallel, and averages them in index order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let reps = config.experiment.num_replications;
    let horizon = config.learning.horizon as usize;
    let mut acc = vec![Accumulator::default(); horizon];
    let mut replications = Vec::with_capacity(reps);
    for chunk_start in (0..reps).step_by(CHUNK) {
        let chunk_end = (chunk_start + CHUNK).min(reps);
        let outcomes: Vec<_> = (chunk_start..chunk_end)
            .into_par_iter()
            .map(|i| run_replication(config, i))
            .collect::<Result<_>>()?;
        for (summary, trace) in outcomes {
            for (a, r) in acc.iter_mut().zip(&trace) {
                a.throughput += r.system_throughput;
                a.cu += r.cu_throughput;
                a.d2d += r.d2d_throughput;
                a.sm += u64::from(r.sm_indicator);
                if r.alpha_ratio.is_finite() {
                    a.ratio += r.alpha_ratio;
                    a.ratio_count += 1;
                }
            }
            replications.push(summary);
        }
    }
    let n = reps as f64;
    let periods = acc
        .iter()
        .enumerate()
        .map(|(i, a)| PeriodAggregate {
            t: i as u64 + 1,
            mean_throughput: a.throughput / n,
            mean_cu_throughput: a.cu / n,
            mean_d2d_throughput: a.d2d / n,
            sm_fraction: a.sm as f64 / n,
            mean_alpha_ratio: if a.ratio_count > 0 {
                a.ratio / a.ratio_count as f64
            } else {
                f64::NAN
            },
        })
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        periods,
        replications,
    })
}
