use crate::bargaining::unclamped_alpha;
use crate::channel::SystemParams;

/// Running-mean estimates of one CU's relayed rates and the allocations they
/// imply.
///
/// The initial estimate counts as one pseudo-sample: after `k` samples the
/// estimate is exactly `(initial + sum of samples) / (1 + k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimator {
    direct_rate: f64,
    estimates: Vec<f64>,
    counts: Vec<u64>,
    own_alphas: Vec<f64>,
    alpha_bounds: (f64, f64),
}

/// Offset keeping the optimistic initial estimate strictly acceptable.
pub const OPTIMISM_MARGIN: f64 = 1e-6;

impl RateEstimator {
    /// Starts every pair at `direct / (1 - alpha_high) + 1e-6`, so each pair
    /// initially looks acceptable.
    pub fn optimistic(direct_rate: f64, num_d2d: usize, sys: &SystemParams) -> Self {
        let initial = direct_rate / (1.0 - sys.alpha_high) + OPTIMISM_MARGIN;
        Self::with_initial(direct_rate, vec![initial; num_d2d], sys)
    }

    pub fn with_initial(direct_rate: f64, initial: Vec<f64>, sys: &SystemParams) -> Self {
        let mut est = RateEstimator {
            direct_rate,
            counts: vec![0; initial.len()],
            own_alphas: vec![0.0; initial.len()],
            estimates: initial,
            alpha_bounds: (sys.alpha_low, sys.alpha_high),
        };
        est.refresh_alphas();
        est
    }

    fn refresh_alphas(&mut self) {
        let (lo, hi) = self.alpha_bounds;
        for (alpha, &r) in self.own_alphas.iter_mut().zip(&self.estimates) {
            *alpha = unclamped_alpha(r, self.direct_rate).clamp(lo, hi);
        }
    }

    /// Folds in a relayed-rate sample from pair `n` with step `1 / (1 + count)`.
    pub fn record(&mut self, n: usize, sample: f64) {
        self.counts[n] += 1;
        let step = 1.0 / (1 + self.counts[n]) as f64;
        self.estimates[n] += step * (sample - self.estimates[n]);
        self.refresh_alphas();
    }

    pub fn direct_rate(&self) -> f64 {
        self.direct_rate
    }

    pub fn estimate(&self, n: usize) -> f64 {
        self.estimates[n]
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn count(&self, n: usize) -> u64 {
        self.counts[n]
    }

    pub fn own_alpha(&self, n: usize) -> f64 {
        self.own_alphas[n]
    }

    pub fn own_alphas(&self) -> &[f64] {
        &self.own_alphas
    }

    /// `(1 - alpha_n) * estimate_n - direct`.
    pub fn cu_utility(&self, n: usize) -> f64 {
        (1.0 - self.own_alphas[n]) * self.estimates[n] - self.direct_rate
    }

    pub fn num_d2d(&self) -> usize {
        self.estimates.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_sample_halves_toward_it() {
        let sys = SystemParams::default();
        let mut est = RateEstimator::with_initial(1.0, vec![0.0, 0.0], &sys);
        est.record(0, 2.0);
        assert_eq!(est.estimate(0), 1.0);
        assert_eq!(est.estimate(1), 0.0);
        assert_eq!(est.count(0), 1);
    }

    #[test]
    fn optimistic_start_is_acceptable() {
        let sys = SystemParams::default();
        let est = RateEstimator::optimistic(2.3, 3, &sys);
        for n in 0..3 {
            assert!(est.cu_utility(n) > 0.0);
            assert!((est.estimate(n) - (4.6 + OPTIMISM_MARGIN)).abs() < 1e-12);
        }
    }

    #[test]
    fn alphas_track_estimates() {
        let sys = SystemParams::default();
        let mut est = RateEstimator::optimistic(1.0, 2, &sys);
        for (i, r) in [3.0, 2.5, 4.0, 0.5].into_iter().enumerate() {
            est.record(i % 2, r);
            for n in 0..2 {
                let expected = ((est.estimate(n) - 1.0) / (2.0 * est.estimate(n))).clamp(0.1, 0.5);
                assert_eq!(est.own_alpha(n), expected);
            }
        }
    }
}
