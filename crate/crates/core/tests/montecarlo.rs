use cvqkd_core::channel::{attenuate_amplitude, ChannelParams};
use cvqkd_core::montecarlo::{
    empirical_key_rate, run_experiment, run_experiment_with_records, threshold_sweep,
    ExperimentConfig,
};
use cvqkd_core::numerics::QuadratureSettings;
use cvqkd_core::optimizer::optimal_threshold;
use cvqkd_core::qstate::QuadratureConvention;
use cvqkd_core::security::{key_rate, AcceptanceRule, CascadeModel, EveModel, SecurityContext};

fn config(n: usize, alpha: f64, eta: f64, threshold: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(n, alpha, ChannelParams::with_transmittance(eta), threshold, seed)
}

#[test]
fn channel_on_and_off_agree_bit_for_bit() {
    let on = config(200_000, 0.8, 0.64, 0.5, 11);
    let off = ExperimentConfig {
        alpha: attenuate_amplitude(0.8, 0.64).unwrap(),
        channel: ChannelParams::lossless(),
        ..on.clone()
    };
    let (a, ra) = run_experiment_with_records(&on).unwrap();
    let (b, rb) = run_experiment_with_records(&off).unwrap();
    assert_eq!(a.analytic_error, b.analytic_error);
    assert_eq!(a.analytic_acceptance, b.analytic_acceptance);
    assert_eq!(ra, rb);
    assert_eq!((a.n_accepted, a.n_errors), (b.n_accepted, b.n_errors));
}

#[test]
fn channel_on_and_off_agree_statistically() {
    // independent seeds: the empirical errors differ only by sampling noise
    let on = config(1_000_000, 0.8, 0.64, 0.5, 12);
    let off = ExperimentConfig {
        alpha: attenuate_amplitude(0.8, 0.64).unwrap(),
        channel: ChannelParams::lossless(),
        seed: 13,
        ..on.clone()
    };
    let a = run_experiment(&on).unwrap();
    let b = run_experiment(&off).unwrap();
    assert_eq!(a.analytic_error, b.analytic_error);
    let (ea, eb) = (a.empirical_error.unwrap(), b.empirical_error.unwrap());
    let var = ea * (1.0 - ea) / a.n_accepted as f64 + eb * (1.0 - eb) / b.n_accepted as f64;
    assert!((ea - eb).abs() < 3.0 * var.sqrt(), "{ea} vs {eb}");
}

#[test]
fn empirical_rates_track_analytic_over_a_grid() {
    let thresholds: Vec<f64> = (0..=4).map(|i| 0.5 * i as f64).collect();
    for (i, (alpha, eta)) in [(0.8, 0.64), (0.5, 0.9), (1.2, 0.3)].into_iter().enumerate() {
        for calibrate in [true, false] {
            let mut cfg = config(1_000_000, alpha, eta, 0.0, 100 + i as u64);
            cfg.calibrate = calibrate;
            for s in threshold_sweep(&cfg, &thresholds).unwrap() {
                assert!(s.max_abs_z() < 3.0, "{s:?}");
            }
        }
    }
}

#[test]
fn plugin_key_rate_matches_analytic() {
    let settings = QuadratureSettings::default();
    let ctx = SecurityContext::rooftop();
    let analytic = key_rate(&ctx, &settings, AcceptanceRule::PositiveContributions)
        .unwrap()
        .key_rate;
    let threshold = optimal_threshold(&ctx, &settings).unwrap().argument;
    let mut cfg = config(1_000_000, 0.8, 0.64, threshold, 14);
    cfg.convention = QuadratureConvention::HALF;
    let s = run_experiment(&cfg).unwrap();
    let g = empirical_key_rate(&s, &CascadeModel::default(), EveModel::default()).unwrap();
    assert!((g / analytic - 1.0).abs() < 0.05, "{g} vs {analytic}");
}

fn plugin_spread(n: usize, seeds: std::ops::Range<u64>) -> f64 {
    let rates: Vec<f64> = seeds
        .map(|seed| {
            let mut cfg = config(n, 0.8, 0.64, 1.0, seed);
            cfg.convention = QuadratureConvention::HALF;
            let s = run_experiment(&cfg).unwrap();
            empirical_key_rate(&s, &CascadeModel::default(), EveModel::default()).unwrap()
        })
        .collect();
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let var = rates.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (rates.len() - 1) as f64;
    var.sqrt()
}

#[test]
fn plugin_standard_error_scales_as_inverse_sqrt_n() {
    // four times the pulses halves the spread; 20 seeds pin the ratio to ~25 %
    let small = plugin_spread(50_000, 0..20);
    let large = plugin_spread(200_000, 1_000..1_020);
    let ratio = small / large;
    assert!((1.4..2.8).contains(&ratio), "ratio {ratio}");
}

#[test]
fn injected_excess_noise_is_visible_in_error_rate() {
    let mut cfg = config(1_000_000, 0.8, 0.64, 0.0, 15);
    cfg.channel.excess_noise = 0.05;
    let s = run_experiment(&cfg).unwrap();
    let z = s.z_scores.0.unwrap();
    assert!(z > 3.0, "{s:?}");
}

#[test]
fn unreachable_threshold_accepts_nothing() {
    let s = run_experiment(&config(10_000, 0.8, 0.64, 1e3, 16)).unwrap();
    assert_eq!(s.n_accepted, 0);
    assert!(s.empirical_error.is_none());
}
