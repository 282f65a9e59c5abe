//! Random problem instances for property checks and the verification suites.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::{RateTable, SystemParams};
use crate::error::{Error, Result};
use crate::game::{validate_theta, ActionProfile};
use crate::matching::{build_preferences, Matching, PreferenceProfile};

/// Rates are drawn log-uniformly from this range, in nats per channel use.
pub const RATE_RANGE: (f64, f64) = (0.1, 10.0);

const MAX_ATTEMPTS: usize = 10_000;

pub fn log_uniform<R: Rng + ?Sized>(low: f64, high: f64, rng: &mut R) -> f64 {
    rng.random_range(low.ln()..=high.ln()).exp()
}

/// A relayed rate and a direct rate, independently log-uniform.
pub fn random_rate_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let (lo, hi) = RATE_RANGE;
    (log_uniform(lo, hi, rng), log_uniform(lo, hi, rng))
}

/// An M x N rate table with independent log-uniform entries.
pub fn random_rate_table<R: Rng + ?Sized>(num_cus: usize, num_d2d: usize, rng: &mut R) -> Result<RateTable> {
    let (lo, hi) = RATE_RANGE;
    let direct = (0..num_cus).map(|_| log_uniform(lo, hi, rng)).collect();
    let relay = (0..num_cus)
        .map(|_| (0..num_d2d).map(|_| log_uniform(lo, hi, rng)).collect())
        .collect();
    let d2d = (0..num_d2d).map(|_| log_uniform(lo, hi, rng)).collect();
    RateTable::new(direct, relay, d2d)
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub rates: RateTable,
    pub prefs: PreferenceProfile,
}

/// A random instance whose positive CU utilities all exceed `sys.theta`.
pub fn random_instance<R: Rng + ?Sized>(
    num_cus: usize,
    num_d2d: usize,
    sys: &SystemParams,
    rng: &mut R,
) -> Result<Instance> {
    for _ in 0..MAX_ATTEMPTS {
        let rates = random_rate_table(num_cus, num_d2d, rng)?;
        let prefs = build_preferences(&rates, sys)?;
        if validate_theta(&prefs, sys).is_ok() {
            return Ok(Instance { rates, prefs });
        }
    }
    Err(Error::Config(format!(
        "no {num_cus}x{num_d2d} instance compatible with theta = {} found",
        sys.theta
    )))
}

/// Each CU picks abstention or one of the N pairs uniformly.
pub fn random_action_profile<R: Rng + ?Sized>(num_cus: usize, num_d2d: usize, rng: &mut R) -> ActionProfile {
    let actions = (0..num_cus)
        .map(|_| {
            let a = rng.random_range(0..=num_d2d);
            (a < num_d2d).then_some(a)
        })
        .collect();
    ActionProfile::new(actions, num_d2d).expect("targets drawn in range")
}

/// A matching of uniformly random size with uniformly random partners.
pub fn random_matching<R: Rng + ?Sized>(num_cus: usize, num_d2d: usize, rng: &mut R) -> Matching {
    let mut cus: Vec<usize> = (0..num_cus).collect();
    let mut d2ds: Vec<usize> = (0..num_d2d).collect();
    cus.shuffle(rng);
    d2ds.shuffle(rng);
    let size = rng.random_range(0..=num_cus.min(num_d2d));
    let pairs: Vec<_> = cus.into_iter().zip(d2ds).take(size).collect();
    Matching::from_pairs(num_cus, num_d2d, &pairs).expect("distinct partners")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rates_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let (a, b) = random_rate_pair(&mut rng);
            assert!((0.1..=10.0).contains(&a) && (0.1..=10.0).contains(&b));
        }
    }

    #[test]
    fn instances_respect_theta() {
        let sys = SystemParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let inst = random_instance(3, 2, &sys, &mut rng).unwrap();
            assert!(validate_theta(&inst.prefs, &sys).is_ok());
            assert_eq!((inst.prefs.num_cus(), inst.prefs.num_d2d()), (3, 2));
        }
    }

    #[test]
    fn random_matchings_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let mu = random_matching(4, 2, &mut rng);
            assert!(mu.len() <= 2);
        }
    }
}
