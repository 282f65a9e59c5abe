//! Nash bargaining over the frame split between a CU and a D2D pair.
//!
//! A CU relayed by D2D pair n gives up a fraction `alpha` of the frame to the
//! D2D link. Both disagreement utilities are zero, so the bargained split
//! maximizes `U_cu(alpha) * U_d2d(alpha)` over `[alpha_low, alpha_high]`.

use crate::channel::SystemParams;
use crate::error::{Error, Result};

/// CU gain over its direct link: `(1 - alpha) * relay - direct`.
pub fn cu_utility(alpha: f64, relay_rate: f64, direct_rate: f64) -> f64 {
    (1.0 - alpha) * relay_rate - direct_rate
}

/// D2D throughput over the frame: `alpha * d2d_rate`.
pub fn d2d_utility(alpha: f64, d2d_rate: f64) -> f64 {
    alpha * d2d_rate
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BargainOutcome {
    pub alpha_star: f64,
    pub cu_utility: f64,
    pub d2d_utility: f64,
    /// Both sides strictly gain from cooperating.
    pub feasible: bool,
}

impl BargainOutcome {
    fn at(alpha: f64, relay_rate: f64, direct_rate: f64, d2d_rate: f64) -> Self {
        let cu = cu_utility(alpha, relay_rate, direct_rate);
        let d2d = d2d_utility(alpha, d2d_rate);
        BargainOutcome {
            alpha_star: alpha,
            cu_utility: cu,
            d2d_utility: d2d,
            feasible: cu > 0.0 && d2d > 0.0,
        }
    }
}

fn check_rates(relay_rate: f64, direct_rate: f64) -> Result<()> {
    if !(relay_rate > 0.0 && direct_rate > 0.0 && relay_rate.is_finite() && direct_rate.is_finite()) {
        return Err(Error::Domain(format!(
            "rates must be positive, got relay {relay_rate} and direct {direct_rate}"
        )));
    }
    Ok(())
}

/// Unclamped optimum of the Nash product.
pub fn unclamped_alpha(relay_rate: f64, direct_rate: f64) -> f64 {
    (relay_rate - direct_rate) / (2.0 * relay_rate)
}

/// Closed-form bargained allocation. The returned `d2d_utility` is per nat of
/// D2D rate; use [`nbs_alpha_with_d2d`] for the absolute value.
///
/// When no allocation benefits the CU the clamped allocation is still
/// returned, flagged infeasible.
pub fn nbs_alpha(relay_rate: f64, direct_rate: f64, sys: &SystemParams) -> Result<BargainOutcome> {
    nbs_alpha_with_d2d(relay_rate, direct_rate, 1.0, sys)
}

pub fn nbs_alpha_with_d2d(
    relay_rate: f64,
    direct_rate: f64,
    d2d_rate: f64,
    sys: &SystemParams,
) -> Result<BargainOutcome> {
    check_rates(relay_rate, direct_rate)?;
    let alpha = sys.clamp_alpha(unclamped_alpha(relay_rate, direct_rate));
    Ok(BargainOutcome::at(alpha, relay_rate, direct_rate, d2d_rate))
}

/// Grid-search maximizer of the Nash product, independent of the closed form.
///
/// Scans `alpha_low, alpha_low + step, ...` and always includes `alpha_high`.
/// If no grid point gives both sides a strictly positive gain the outcome is
/// infeasible and sits at `alpha_low`.
pub fn nbs_alpha_oracle(relay_rate: f64, direct_rate: f64, sys: &SystemParams, grid_step: f64) -> BargainOutcome {
    assert!(grid_step > 0.0, "grid step must be positive");
    let steps = ((sys.alpha_high - sys.alpha_low) / grid_step).floor() as usize;
    let grid = (0..=steps)
        .map(|k| sys.alpha_low + k as f64 * grid_step)
        .filter(|&a| a < sys.alpha_high)
        .chain(std::iter::once(sys.alpha_high));
    let mut best: Option<(f64, f64)> = None;
    for alpha in grid {
        let cu = cu_utility(alpha, relay_rate, direct_rate);
        let d2d = d2d_utility(alpha, 1.0);
        if cu <= 0.0 || d2d <= 0.0 {
            continue;
        }
        let product = cu * d2d;
        if best.is_none_or(|(_, p)| product > p) {
            best = Some((alpha, product));
        }
    }
    match best {
        Some((alpha, _)) => BargainOutcome::at(alpha, relay_rate, direct_rate, 1.0),
        None => BargainOutcome {
            feasible: false,
            ..BargainOutcome::at(sys.alpha_low, relay_rate, direct_rate, 1.0)
        },
    }
}

/// Whether D2D pair n is acceptable to CU m at the bargained allocation.
pub fn is_acceptable(relay_rate: f64, direct_rate: f64, sys: &SystemParams) -> Result<bool> {
    Ok(nbs_alpha(relay_rate, direct_rate, sys)?.cu_utility > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn utilities() {
        assert!((cu_utility(0.25, 2.0, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(cu_utility(0.3, 2.0, 2.0 * 0.7), 0.0);
        assert!((cu_utility(0.5, 1.0, 1.0) + 0.5).abs() < 1e-15);
        assert!((d2d_utility(0.1, 3.0) - 0.3).abs() < 1e-15);
        assert_eq!(d2d_utility(0.0, 7.0), 0.0);
        assert_eq!(d2d_utility(0.5, 2.0), 1.0);
    }

    #[test]
    fn closed_form_cases() {
        let s = sys();
        let o = nbs_alpha(2.0, 1.0, &s).unwrap();
        assert!((o.alpha_star - 0.25).abs() < 1e-15);
        assert!((o.cu_utility - 0.5).abs() < 1e-15);
        assert!(o.feasible);

        let o = nbs_alpha(1.0, 1.0, &s).unwrap();
        assert_eq!(o.alpha_star, 0.1);
        assert!((o.cu_utility + 0.1).abs() < 1e-15);
        assert!(!o.feasible);

        let o = nbs_alpha(10.0, 1.0, &s).unwrap();
        assert!((o.alpha_star - 0.45).abs() < 1e-15);
        assert!((o.cu_utility - 4.5).abs() < 1e-12);
        assert!(o.feasible);

        let o = nbs_alpha(0.5, 1.0, &s).unwrap();
        assert_eq!(o.alpha_star, 0.1);
        assert!((o.cu_utility + 0.55).abs() < 1e-15);
        assert!(!o.feasible);

        assert!(matches!(nbs_alpha(0.0, 1.0, &s), Err(Error::Domain(_))));
        assert!(matches!(nbs_alpha(1.0, -1.0, &s), Err(Error::Domain(_))));
    }

    #[test]
    fn absolute_d2d_utility() {
        let o = nbs_alpha_with_d2d(2.0, 1.0, 8.0, &sys()).unwrap();
        assert!((o.d2d_utility - 2.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_cases() {
        let s = sys();
        let o = nbs_alpha_oracle(2.0, 1.0, &s, 1e-4);
        assert!((o.alpha_star - 0.25).abs() < 1e-3);
        assert!(o.feasible);

        let o = nbs_alpha_oracle(0.9, 1.0, &s, 1e-4);
        assert!(!o.feasible);

        let mut prev = 0.0;
        for relay in [1.5, 2.0, 3.0, 10.0] {
            let a = nbs_alpha_oracle(relay, 1.0, &s, 1e-4).alpha_star;
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn acceptability_boundary() {
        let s = sys();
        assert!(is_acceptable(2.0, 1.0, &s).unwrap());
        assert!(!is_acceptable(1.0, 1.0, &s).unwrap());
        let direct = 1.3;
        let edge = direct / (1.0 - s.alpha_low);
        assert!(is_acceptable(edge * (1.0 + 1e-9), direct, &s).unwrap());
        assert!(!is_acceptable(edge * (1.0 - 1e-9), direct, &s).unwrap());
    }
}
