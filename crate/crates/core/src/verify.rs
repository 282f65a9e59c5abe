//! Oracle suites: closed forms and fast algorithms checked against brute
//! force on random instances.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bargaining::{nbs_alpha, nbs_alpha_oracle};
use crate::channel::SystemParams;
use crate::error::{Error, Result};
use crate::game::{better_reply_path, enumerate_pne, game_utility, induced_matching, is_pne, ActionProfile};
use crate::instances::{random_action_profile, random_instance, random_matching, random_rate_pair};
use crate::matching::{enumerate_stable_matchings, find_blocking_pairs, gale_shapley, is_individually_rational, is_stable, Matching,
};

pub const NBS_GRID_STEP: f64 = 1e-4;
pub const NBS_TOLERANCE: f64 = 1.1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Nbs,
    Stability,
    /// Equilibrium-induced matchings coincide with stable matchings.
    Theorem1,
    /// Better-reply paths reach an equilibrium.
    Theorem2,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Nbs, Suite::Stability, Suite::Theorem1, Suite::Theorem2];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Nbs => "nbs",
            Suite::Stability => "stability",
            Suite::Theorem1 => "theorem1",
            Suite::Theorem2 => "theorem2",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {}: {} cases, {} failures, {:.2}s",
            self.suite,
            self.cases,
            self.failures.len(),
            self.elapsed.as_secs_f64()
        )?;
        for failure in self.failures.iter().take(10) {
            write!(f, "\n  {failure}")?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let sys = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cases, failures) = match suite {
        Suite::Nbs => nbs_suite(1000, &sys, &mut rng)?,
        Suite::Stability => stability_suite(500, &sys, &mut rng)?,
        Suite::Theorem1 => equivalence_suite(100, &sys, &mut rng)?,
        Suite::Theorem2 => better_reply_suite(20, 100, &sys, &mut rng)?,
    };
    Ok(SuiteReport {
        suite,
        cases,
        failures,
        elapsed: start.elapsed(),
    })
}

/// Closed-form bargaining solution against a grid search.
pub fn nbs_suite(count: usize, sys: &SystemParams, rng: &mut ChaCha8Rng) -> Result<(usize, Vec<String>)> {
    let mut failures = Vec::new();
    for _ in 0..count {
        let (relay, direct) = random_rate_pair(rng);
        let closed = nbs_alpha(relay, direct, sys)?;
        let grid = nbs_alpha_oracle(relay, direct, sys, NBS_GRID_STEP);
        if closed.feasible != grid.feasible {
            failures.push(format!(
                "relay {relay}, direct {direct}: feasible {} vs oracle {}",
                closed.feasible, grid.feasible
            ));
        } else if closed.feasible && (closed.alpha_star - grid.alpha_star).abs() > NBS_TOLERANCE {
            failures.push(format!(
                "relay {relay}, direct {direct}: alpha {} vs oracle {}",
                closed.alpha_star, grid.alpha_star
            ));
        }
    }
    Ok((count, failures))
}

/// Deferred acceptance yields stable matchings, and on individually rational
/// matchings the blocking-pair scan agrees with the stability predicate.
pub fn stability_suite(count: usize, sys: &SystemParams, rng: &mut ChaCha8Rng) -> Result<(usize, Vec<String>)> {
    let mut failures = Vec::new();
    for case in 0..count {
        let num_cus = rng.random_range(1..=6);
        let num_d2d = rng.random_range(1..=6);
        let inst = random_instance(num_cus, num_d2d, sys, rng)?;
        let mu = gale_shapley(&inst.prefs);
        if !is_stable(&mu, &inst.prefs) {
            failures.push(format!("case {case} ({num_cus}x{num_d2d}): deferred acceptance gave unstable {mu}"));
        }
        let mut probes = vec![mu];
        probes.extend((0..5).map(|_| random_matching(num_cus, num_d2d, rng)));
        for probe in probes {
            let blocking = find_blocking_pairs(&probe, &inst.prefs)?;
            let rational = is_individually_rational(&probe, &inst.prefs);
            if rational && blocking.is_empty() != is_stable(&probe, &inst.prefs) {
                failures.push(format!(
                    "case {case}: {probe} has {} blocking pairs but is_stable = {}",
                    blocking.len(),
                    is_stable(&probe, &inst.prefs)
                ));
            }
            if !rational && is_stable(&probe, &inst.prefs) {
                failures.push(format!("case {case}: {probe} is irrational yet reported stable"));
            }
        }
    }
    Ok((count, failures))
}

/// Matchings induced by equilibria coincide with the stable matchings.
pub fn equivalence_suite(count: usize, sys: &SystemParams, rng: &mut ChaCha8Rng) -> Result<(usize, Vec<String>)> {
    let mut failures = Vec::new();
    for case in 0..count {
        let num_cus = rng.random_range(2..=3);
        let num_d2d = rng.random_range(2..=3);
        let inst = random_instance(num_cus, num_d2d, sys, rng)?;
        let from_pne: BTreeSet<Matching> = enumerate_pne(&inst.prefs, sys)?
            .iter()
            .map(|b| induced_matching(b, &inst.prefs))
            .collect();
        let stable: BTreeSet<Matching> = enumerate_stable_matchings(&inst.prefs)?.into_iter().collect();
        for mu in from_pne.difference(&stable) {
            failures.push(format!("case {case}: equilibrium matching {mu} is not stable"));
        }
        for mu in stable.difference(&from_pne) {
            failures.push(format!("case {case}: stable matching {mu} has no equilibrium"));
        }
    }
    Ok((count, failures))
}

/// Better-reply paths from random starts are strict unilateral improvements
/// ending at an equilibrium.
pub fn better_reply_suite(
    instances: usize,
    starts: usize,
    sys: &SystemParams,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, Vec<String>)> {
    let mut failures = Vec::new();
    for case in 0..instances {
        let num_cus = rng.random_range(2..=4);
        let num_d2d = rng.random_range(2..=4);
        let inst = random_instance(num_cus, num_d2d, sys, rng)?;
        for _ in 0..starts {
            let start = random_action_profile(num_cus, num_d2d, rng);
            let path = better_reply_path(&start, &inst.prefs, sys)?;
            if let Some(problem) = path_problem(&start, &path, &inst.prefs, sys) {
                failures.push(format!("case {case}, start {start}: {problem}"));
            }
        }
    }
    Ok((instances * starts, failures))
}

fn path_problem(
    start: &ActionProfile,
    path: &[ActionProfile],
    prefs: &crate::matching::PreferenceProfile,
    sys: &SystemParams,
) -> Option<String> {
    if path.first() != Some(start) {
        return Some("path does not begin at the start profile".into());
    }
    for (i, step) in path.windows(2).enumerate() {
        let (from, to) = (&step[0], &step[1]);
        let movers: Vec<usize> = (0..from.len()).filter(|&m| from.get(m) != to.get(m)).collect();
        let [m] = movers[..] else {
            return Some(format!("step {i} changes {} actions", movers.len()));
        };
        if game_utility(m, to, prefs, sys) <= game_utility(m, from, prefs, sys) {
            return Some(format!("step {i} is not a strict improvement for CU {m}"));
        }
    }
    let last = path.last().expect("non-empty path");
    (!is_pne(last, prefs, sys)).then(|| format!("path ends at {last}, which is not an equilibrium"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for suite in Suite::ALL {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        assert!("theorem3".parse::<Suite>().is_err());
    }

    #[test]
    fn small_suites_pass() {
        let sys = SystemParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(nbs_suite(50, &sys, &mut rng).unwrap().1.is_empty());
        assert!(stability_suite(20, &sys, &mut rng).unwrap().1.is_empty());
        assert!(equivalence_suite(5, &sys, &mut rng).unwrap().1.is_empty());
        assert!(better_reply_suite(2, 5, &sys, &mut rng).unwrap().1.is_empty());
    }

    #[test]
    fn broken_path_is_reported() {
        let sys = SystemParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let inst = random_instance(2, 2, &sys, &mut rng).unwrap();
        let start = ActionProfile::all_abstain(2);
        let jump = ActionProfile::new(vec![Some(0), Some(1)], 2).unwrap();
        assert!(path_problem(&start, &[start.clone(), jump], &inst.prefs, &sys).is_some());
    }
}
