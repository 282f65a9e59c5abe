//! Ergodic rates against Monte Carlo and frozen closed-form values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use relaymatch::channel::{
    expected_log_rate, generate_topology, sample_direct_rate, sample_relay_rate, true_rates, SystemParams,
    TopologyParams,
};

/// Sample mean and standard error of `ln(1 + c * eta)`, eta ~ Exp(1).
fn monte_carlo(c: f64, draws: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..draws {
        let eta: f64 = rng.sample(Exp1);
        let x = (c * eta).ln_1p();
        sum += x;
        sq += x * x;
    }
    let n = draws as f64;
    let mean = sum / n;
    (mean, ((sq / n - mean * mean) / n).sqrt())
}

// e^{1/c} E1(1/c), evaluated with scipy.special.exp1.
const CLOSED_FORM: [(f64, f64); 2] = [(1.0, 0.5963473623231946), (100.0, 4.078511443456425)];

#[test]
fn expected_log_rate_matches_closed_form() {
    for (c, value) in CLOSED_FORM {
        let got = expected_log_rate(c).unwrap();
        assert!((got - value).abs() < 1e-9, "c = {c}: {got} vs {value}");
    }
}

#[test]
fn expected_log_rate_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for c in [1.0, 100.0, 0.01, 1e4] {
        let (mean, se) = monte_carlo(c, 1_000_000, &mut rng);
        let got = expected_log_rate(c).unwrap();
        assert!((got - mean).abs() < 5.0 * se, "c = {c}: {got} vs {mean} +- {se}");
    }
}

#[test]
fn true_rates_match_sampled_means() {
    let sys = SystemParams::default();
    let params = TopologyParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let topo = generate_topology(&params, &mut rng).unwrap();
        let rates = true_rates(&topo, &sys).unwrap();
        for m in 0..params.num_cus {
            let expected = expected_log_rate(topo.cu_snr(m, &sys)).unwrap();
            assert!((rates.direct(m) - expected).abs() < 1e-12);
            for n in 0..params.num_d2d {
                let c_m = expected_log_rate(topo.cu_snr(m, &sys)).unwrap();
                let c_n = expected_log_rate(topo.relay_snr(n, &sys)).unwrap();
                assert!((rates.relay(m, n) - 0.5 * (c_m + c_n)).abs() < 1e-12);
            }
        }
        for n in 0..params.num_d2d {
            let expected = expected_log_rate(topo.d2d_snr(n, &sys)).unwrap();
            assert!((rates.d2d(n) - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn relay_samples_average_to_true_rate() {
    let sys = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let topo = generate_topology(&TopologyParams::default(), &mut rng).unwrap();
    let rates = true_rates(&topo, &sys).unwrap();
    let draws = 1_000_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..draws {
        let r = sample_relay_rate(1, 2, &topo, &sys, &mut rng);
        sum += r;
        sq += r * r;
    }
    let n = draws as f64;
    let mean = sum / n;
    let se = ((sq / n - mean * mean) / n).sqrt();
    assert!((mean - rates.relay(1, 2)).abs() < 5.0 * se, "{mean} vs {}", rates.relay(1, 2));

    let direct: f64 = (0..200_000).map(|_| sample_direct_rate(0, &topo, &sys, &mut rng)).sum::<f64>() / 200_000.0;
    assert!((direct - rates.direct(0)).abs() < 0.02 * rates.direct(0));
}
