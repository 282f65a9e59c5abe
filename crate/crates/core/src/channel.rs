//! Cell geometry, mean channel gains and per-period fading.
//!
//! The base station sits at the origin. Channel gain on a link of length `D`
//! is `eta * D^-K` with `eta` unit-mean exponential fading, drawn
//! independently per phase and per period. All rates are in nats per channel
//! use.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn polar(center: Point, radius: f64, angle: f64) -> Point {
        Point {
            x: center.x + radius * angle.cos(),
            y: center.y + radius * angle.sin(),
        }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Geometry of one cell. Distances are in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyParams {
    pub num_cus: usize,
    pub num_d2d: usize,
    pub cell_radius: f64,
    pub cu_min_bs_distance: f64,
    pub dt_bs_distance_range: (f64, f64),
    pub d2d_link_range: (f64, f64),
    pub path_loss_exponent: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            num_cus: 4,
            num_d2d: 5,
            cell_radius: 400.0,
            cu_min_bs_distance: 300.0,
            dt_bs_distance_range: (150.0, 250.0),
            d2d_link_range: (10.0, 60.0),
            path_loss_exponent: 4.0,
        }
    }
}

fn check_range(name: &str, (low, high): (f64, f64)) -> Result<()> {
    if !(low.is_finite() && high.is_finite() && low > 0.0 && low <= high) {
        return Err(Error::Config(format!(
            "{name} must satisfy 0 < low <= high, got ({low}, {high})"
        )));
    }
    Ok(())
}

impl TopologyParams {
    pub fn with_size(num_cus: usize, num_d2d: usize) -> Self {
        TopologyParams {
            num_cus,
            num_d2d,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_cus == 0 {
            return Err(Error::Config("num_cus must be at least 1".into()));
        }
        if self.num_d2d == 0 {
            return Err(Error::Config("num_d2d must be at least 1".into()));
        }
        if !(self.cell_radius.is_finite() && self.cell_radius > 0.0) {
            return Err(Error::Config(format!(
                "cell_radius must be positive, got {}",
                self.cell_radius
            )));
        }
        if !(self.cu_min_bs_distance > 0.0 && self.cu_min_bs_distance <= self.cell_radius) {
            return Err(Error::Config(format!(
                "cu_min_bs_distance must lie in (0, cell_radius = {}], got {}",
                self.cell_radius, self.cu_min_bs_distance
            )));
        }
        check_range("dt_bs_distance_range", self.dt_bs_distance_range)?;
        check_range("d2d_link_range", self.d2d_link_range)?;
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0) {
            return Err(Error::Config(format!(
                "path_loss_exponent must be positive, got {}",
                self.path_loss_exponent
            )));
        }
        Ok(())
    }
}

/// Radio and bargaining constants shared by every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// CU transmit power, watts.
    pub p_c: f64,
    /// DT transmit power, watts.
    pub p_d: f64,
    /// Noise power, watts.
    pub n_0: f64,
    pub alpha_low: f64,
    pub alpha_high: f64,
    /// Negotiation cost charged for every proposal.
    pub theta: f64,
    /// Margin of the exploration allocation above `alpha_high`.
    pub theta_prime: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            p_c: 0.02,
            p_d: 0.02,
            // -100 dBm
            n_0: 1e-13,
            alpha_low: 0.1,
            alpha_high: 0.5,
            theta: 1e-3,
            theta_prime: 1e-3,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_c", self.p_c), ("p_d", self.p_d), ("n_0", self.n_0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0 < self.alpha_low && self.alpha_low < self.alpha_high && self.alpha_high < 1.0) {
            return Err(Error::Config(format!(
                "time allocation bounds must satisfy 0 < alpha_low < alpha_high < 1, got [{}, {}]",
                self.alpha_low, self.alpha_high
            )));
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::Config(format!("theta must be positive, got {}", self.theta)));
        }
        if !(self.theta_prime > 0.0 && self.alpha_high + self.theta_prime < 1.0) {
            return Err(Error::Config(format!(
                "theta_prime must be positive with alpha_high + theta_prime < 1, got {}",
                self.theta_prime
            )));
        }
        Ok(())
    }

    /// Allocation offered when exploring; beats any bargained allocation.
    pub fn exploration_alpha(&self) -> f64 {
        self.alpha_high + self.theta_prime
    }

    pub fn clamp_alpha(&self, alpha: f64) -> f64 {
        alpha.clamp(self.alpha_low, self.alpha_high)
    }
}

/// Mean (fading-free) gains of every link the model uses.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanGains {
    /// CU m to BS.
    pub cu_bs: Vec<f64>,
    /// DT n to BS.
    pub dt_bs: Vec<f64>,
    /// DT n to DR n.
    pub dt_dr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub bs_position: Point,
    pub cu_positions: Vec<Point>,
    pub dt_positions: Vec<Point>,
    pub dr_positions: Vec<Point>,
    pub mean_gains: MeanGains,
}

impl Topology {
    /// Builds a topology from explicit positions, deriving the mean gains.
    pub fn from_positions(
        cu_positions: Vec<Point>,
        dt_positions: Vec<Point>,
        dr_positions: Vec<Point>,
        path_loss_exponent: f64,
    ) -> Result<Topology> {
        if dt_positions.len() != dr_positions.len() {
            return Err(Error::Structural(format!(
                "{} DTs but {} DRs",
                dt_positions.len(),
                dr_positions.len()
            )));
        }
        let bs = Point::ORIGIN;
        let gains = |pts: &[Point], to: &dyn Fn(usize) -> Point| -> Result<Vec<f64>> {
            pts.iter()
                .enumerate()
                .map(|(i, p)| mean_gain(p.distance(&to(i)), path_loss_exponent))
                .collect()
        };
        let mean_gains = MeanGains {
            cu_bs: gains(&cu_positions, &|_| bs)?,
            dt_bs: gains(&dt_positions, &|_| bs)?,
            dt_dr: gains(&dt_positions, &|i| dr_positions[i])?,
        };
        Ok(Topology {
            bs_position: bs,
            cu_positions,
            dt_positions,
            dr_positions,
            mean_gains,
        })
    }

    pub fn num_cus(&self) -> usize {
        self.cu_positions.len()
    }

    pub fn num_d2d(&self) -> usize {
        self.dt_positions.len()
    }

    /// Mean SNR of the CU m uplink.
    pub fn cu_snr(&self, m: usize, sys: &SystemParams) -> f64 {
        sys.p_c * self.mean_gains.cu_bs[m] / sys.n_0
    }

    /// Mean SNR of the DT n to BS forwarding link.
    pub fn relay_snr(&self, n: usize, sys: &SystemParams) -> f64 {
        sys.p_d * self.mean_gains.dt_bs[n] / sys.n_0
    }

    /// Mean SNR of the D2D link of pair n.
    pub fn d2d_snr(&self, n: usize, sys: &SystemParams) -> f64 {
        sys.p_d * self.mean_gains.dt_dr[n] / sys.n_0
    }
}

/// Path-loss gain `distance^-k`.
pub fn mean_gain(distance: f64, k: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::Domain(format!("link distance must be positive, got {distance}")));
    }
    Ok(distance.powf(-k))
}

/// Draws a topology: CUs uniform over the annulus between
/// `cu_min_bs_distance` and `cell_radius`, DTs at a uniform BS distance and
/// angle, each DR at a uniform link length and angle around its DT.
pub fn generate_topology<R: Rng + ?Sized>(params: &TopologyParams, rng: &mut R) -> Result<Topology> {
    params.validate()?;
    let (r0, r1) = (params.cu_min_bs_distance, params.cell_radius);
    let cu_positions = (0..params.num_cus)
        .map(|_| {
            let u: f64 = rng.random();
            let radius = (r0 * r0 + u * (r1 * r1 - r0 * r0)).sqrt();
            Point::polar(Point::ORIGIN, radius, rng.random::<f64>() * TAU)
        })
        .collect();
    let mut dt_positions = Vec::with_capacity(params.num_d2d);
    let mut dr_positions = Vec::with_capacity(params.num_d2d);
    for _ in 0..params.num_d2d {
        let (lo, hi) = params.dt_bs_distance_range;
        let dt = Point::polar(Point::ORIGIN, uniform(rng, lo, hi), rng.random::<f64>() * TAU);
        let (lo, hi) = params.d2d_link_range;
        let dr = Point::polar(dt, uniform(rng, lo, hi), rng.random::<f64>() * TAU);
        dt_positions.push(dt);
        dr_positions.push(dr);
    }
    Topology::from_positions(cu_positions, dt_positions, dr_positions, params.path_loss_exponent)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// `E[ln(1 + c * eta)]` for unit-mean exponential `eta`.
///
/// Integrating by parts gives `int_0^inf c e^-x / (1 + c x) dx`; the
/// substitution `x = e^s` turns that into a smooth bell on the real line,
/// which is integrated adaptively.
pub fn expected_log_rate(snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::Domain(format!("SNR scale must be positive and finite, got {snr}")));
    }
    let c = snr;
    // The result is at least ~min(c, 0.5), so this is a relative tolerance
    // well below 1e-6.
    let scale = c.min(1.0);
    let lo = (1e-13 * scale / c).ln();
    let hi = 50f64.ln();
    let integrand = |s: f64| {
        let x = s.exp();
        c * x * (-x).exp() / (1.0 + c * x)
    };
    Ok(quadrature::integrate(integrand, lo, hi, 1e-11 * scale))
}

/// True expected rates of every CU, relay and D2D link.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    direct: Vec<f64>,
    relay: Vec<Vec<f64>>,
    d2d: Vec<f64>,
}

impl RateTable {
    /// `relay[m][n]` is the rate of CU m relayed by D2D pair n.
    pub fn new(direct: Vec<f64>, relay: Vec<Vec<f64>>, d2d: Vec<f64>) -> Result<RateTable> {
        let n = d2d.len();
        if direct.is_empty() || n == 0 {
            return Err(Error::Structural("rate table needs at least one CU and one D2D pair".into()));
        }
        if relay.len() != direct.len() || relay.iter().any(|row| row.len() != n) {
            return Err(Error::Structural(format!(
                "relay rates must be {}x{}",
                direct.len(),
                n
            )));
        }
        let all = direct.iter().chain(relay.iter().flatten()).chain(d2d.iter());
        if let Some(bad) = all.copied().find(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Domain(format!("rates must be positive and finite, got {bad}")));
        }
        Ok(RateTable { direct, relay, d2d })
    }

    pub fn num_cus(&self) -> usize {
        self.direct.len()
    }

    pub fn num_d2d(&self) -> usize {
        self.d2d.len()
    }

    pub fn direct(&self, m: usize) -> f64 {
        self.direct[m]
    }

    pub fn relay(&self, m: usize, n: usize) -> f64 {
        self.relay[m][n]
    }

    pub fn d2d(&self, n: usize) -> f64 {
        self.d2d[n]
    }

    pub fn direct_rates(&self) -> &[f64] {
        &self.direct
    }

    pub fn d2d_rates(&self) -> &[f64] {
        &self.d2d
    }
}

pub fn true_rates(topology: &Topology, sys: &SystemParams) -> Result<RateTable> {
    sys.validate()?;
    let direct: Vec<f64> = (0..topology.num_cus())
        .map(|m| expected_log_rate(topology.cu_snr(m, sys)))
        .collect::<Result<_>>()?;
    let forward: Vec<f64> = (0..topology.num_d2d())
        .map(|n| expected_log_rate(topology.relay_snr(n, sys)))
        .collect::<Result<_>>()?;
    let d2d: Vec<f64> = (0..topology.num_d2d())
        .map(|n| expected_log_rate(topology.d2d_snr(n, sys)))
        .collect::<Result<_>>()?;
    let relay = direct
        .iter()
        .map(|&rm| forward.iter().map(|&rf| 0.5 * (rm + rf)).collect())
        .collect();
    RateTable::new(direct, relay, d2d)
}

fn fading_log_rate<R: Rng + ?Sized>(snr: f64, rng: &mut R) -> f64 {
    let eta: f64 = rng.sample(Exp1);
    (snr * eta).ln_1p()
}

/// One realization of the two-phase relayed CU rate `r^C_mn`.
pub fn sample_relay_rate<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    topology: &Topology,
    sys: &SystemParams,
    rng: &mut R,
) -> f64 {
    let first = fading_log_rate(topology.cu_snr(m, sys), rng);
    let second = fading_log_rate(topology.relay_snr(n, sys), rng);
    0.5 * (first + second)
}

/// One realization of the CU m direct uplink rate.
pub fn sample_direct_rate<R: Rng + ?Sized>(m: usize, topology: &Topology, sys: &SystemParams, rng: &mut R) -> f64 {
    fading_log_rate(topology.cu_snr(m, sys), rng)
}

/// One realization of the D2D link rate of pair n.
pub fn sample_d2d_rate<R: Rng + ?Sized>(n: usize, topology: &Topology, sys: &SystemParams, rng: &mut R) -> f64 {
    fading_log_rate(topology.d2d_snr(n, sys), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_gain_values() {
        assert!((mean_gain(100.0, 4.0).unwrap() - 1e-8).abs() < 1e-22);
        assert_eq!(mean_gain(1.0, 4.0).unwrap(), 1.0);
        assert!((mean_gain(200.0, 4.0).unwrap() - 6.25e-10).abs() < 1e-24);
        assert!(matches!(mean_gain(0.0, 4.0), Err(Error::Domain(_))));
        assert!(matches!(mean_gain(-3.0, 4.0), Err(Error::Domain(_))));
    }

    #[test]
    fn expected_log_rate_small_snr_vanishes() {
        for c in [1e-3, 1e-6, 1e-12] {
            let v = expected_log_rate(c).unwrap();
            // E[ln(1 + c eta)] = c - c^2 + O(c^3) for unit-mean exponential eta
            assert!((v - (c - c * c)).abs() <= 3.0 * c * c * c + 1e-6 * c, "c={c} v={v}");
        }
        assert!(matches!(expected_log_rate(0.0), Err(Error::Domain(_))));
        assert!(matches!(expected_log_rate(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn expected_log_rate_is_increasing() {
        let mut prev = 0.0;
        for i in 0..200 {
            let c = 10f64.powf(-4.0 + 12.0 * i as f64 / 199.0);
            let v = expected_log_rate(c).unwrap();
            assert!(v > prev, "not increasing at c={c}");
            prev = v;
        }
    }

    #[test]
    fn topology_respects_geometry() {
        let params = TopologyParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let topo = generate_topology(&params, &mut rng).unwrap();
            for p in &topo.cu_positions {
                let d = p.distance(&topo.bs_position);
                assert!((300.0 - 1e-9..=400.0 + 1e-9).contains(&d));
            }
            for (i, dt) in topo.dt_positions.iter().enumerate() {
                let d = dt.distance(&topo.bs_position);
                assert!((150.0 - 1e-9..=250.0 + 1e-9).contains(&d));
                let link = dt.distance(&topo.dr_positions[i]);
                assert!((10.0 - 1e-9..=60.0 + 1e-9).contains(&link));
                let g = topo.mean_gains.dt_bs[i];
                assert!(g >= 250f64.powi(-4) * (1.0 - 1e-9) && g <= 150f64.powi(-4) * (1.0 + 1e-9));
                assert!((topo.mean_gains.dt_dr[i] - link.powi(-4)).abs() <= 1e-12 * link.powi(-4));
            }
        }
    }

    #[test]
    fn topology_is_deterministic() {
        let params = TopologyParams::with_size(2, 2);
        let a = generate_topology(&params, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = generate_topology(&params, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_topology_params_name_the_bound() {
        let mut params = TopologyParams::default();
        params.cu_min_bs_distance = 500.0;
        let err = generate_topology(&params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(err.to_string().contains("cu_min_bs_distance"));

        let mut params = TopologyParams::default();
        params.d2d_link_range = (60.0, 10.0);
        let err = params.validate().unwrap_err();
        assert!(err.to_string().contains("d2d_link_range"));

        let mut params = TopologyParams::default();
        params.num_d2d = 0;
        assert!(params.validate().is_err());
    }

    #[test]
    fn invalid_system_params() {
        let mut sys = SystemParams::default();
        sys.alpha_low = 0.6;
        assert!(sys.validate().unwrap_err().to_string().contains("alpha_low"));
        let mut sys = SystemParams::default();
        sys.theta = 0.0;
        assert!(sys.validate().is_err());
    }

    #[test]
    fn shared_dt_positions_give_identical_columns() {
        let dt = Point { x: 180.0, y: 20.0 };
        let topo = Topology::from_positions(
            vec![Point { x: 350.0, y: 0.0 }, Point { x: 0.0, y: -320.0 }],
            vec![dt, dt],
            vec![Point { x: 200.0, y: 20.0 }, Point { x: 180.0, y: 50.0 }],
            4.0,
        )
        .unwrap();
        let rates = true_rates(&topo, &SystemParams::default()).unwrap();
        for m in 0..2 {
            assert_eq!(rates.relay(m, 0), rates.relay(m, 1));
            assert!(rates.relay(m, 0) >= rates.direct(m) / 2.0);
        }
    }

    #[test]
    fn rate_table_rejects_bad_entries() {
        assert!(RateTable::new(vec![1.0], vec![vec![1.0, 2.0]], vec![1.0]).is_err());
        assert!(RateTable::new(vec![1.0], vec![vec![-1.0]], vec![1.0]).is_err());
        assert!(RateTable::new(vec![1.0], vec![vec![f64::NAN]], vec![1.0]).is_err());
    }

    #[test]
    fn samples_are_nonnegative_and_reproducible() {
        let params = TopologyParams::default();
        let sys = SystemParams::default();
        let topo = generate_topology(&params, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100)
                .map(|i| sample_relay_rate(i % 4, i % 5, &topo, &sys, &mut rng))
                .collect::<Vec<_>>()
        };
        let a = draw(9);
        assert!(a.iter().all(|&r| r >= 0.0));
        assert_eq!(a, draw(9));
    }
}
