//! Independent reference computations for the analytic quantities.

// frozen reference values keep every digit they were computed with
#![allow(clippy::excessive_precision)]

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use cvqkd_core::numerics::QuadratureSettings;
use cvqkd_core::qstate::{coherent_overlap, two_state_entropy, QuadratureConvention};
use cvqkd_core::security::{
    binary_entropy, key_rate, AcceptanceRule, CascadeModel, EveModel, SecurityContext,
};

/// Number-basis amplitudes of the real coherent state `|γ⟩`.
fn fock_vector(gamma: f64, dim: usize) -> DVector<f64> {
    let mut c = DVector::zeros(dim);
    c[0] = (-0.5 * gamma * gamma).exp();
    for n in 1..dim {
        c[n] = c[n - 1] * gamma / (n as f64).sqrt();
    }
    c
}

/// Von Neumann entropy (bits) of `p|γ⟩⟨γ| + (1−p)|−γ⟩⟨−γ|` by direct
/// diagonalization in a truncated number basis.
fn fock_mixture_entropy(p: f64, gamma: f64, max_dim: usize) -> f64 {
    // drop number states with negligible weight; the eigensolver misbehaves
    // on rows that are pure underflow
    let full = fock_vector(gamma, max_dim);
    let dim = full.iter().position(|c| c.abs() < 1e-20).unwrap_or(max_dim).max(2);
    assert!(dim < max_dim, "truncation too tight for gamma = {gamma}");
    let plus = fock_vector(gamma, dim);
    let minus = fock_vector(-gamma, dim);
    let rho: DMatrix<f64> =
        &plus * plus.transpose() * p + &minus * minus.transpose() * (1.0 - p);
    SymmetricEigen::new(rho)
        .eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.log2())
        .sum()
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

#[test]
fn coherent_overlap_matches_number_basis() {
    for i in 0..=40 {
        let gamma = 0.1 * i as f64;
        let dim = 160;
        let direct = fock_vector(gamma, dim).dot(&fock_vector(-gamma, dim));
        assert_abs_diff_eq!(coherent_overlap(gamma).unwrap(), direct, epsilon = 1e-12);
    }
}

#[test]
fn mixture_entropy_matches_gram_diagonalization() {
    for gi in 0..=20 {
        let gamma = 0.1 * gi as f64;
        let overlap = coherent_overlap(gamma).unwrap();
        for pi in 0..10 {
            let p = 0.5 + 0.05 * pi as f64;
            let oracle = fock_mixture_entropy(p, gamma, 60);
            let s = two_state_entropy(p, overlap).unwrap();
            assert_abs_diff_eq!(s, oracle, epsilon = 1e-10);
        }
    }
}

#[test]
fn eve_holevo_matches_gram_diagonalization() {
    // outcome β chosen so that the posterior weight of the sent state is p
    for gi in 1..=20 {
        let gamma = 0.1 * gi as f64;
        let eta: f64 = 0.5;
        let alpha = gamma / (1.0 - eta).sqrt();
        let ctx = SecurityContext::new(alpha, eta).with_eve(EveModel::PosteriorConditioned);
        let s2 = ctx.outcome_std().powi(2);
        for pi in 0..10 {
            let p = 0.5 + 0.049 * pi as f64;
            let beta = s2 / (2.0 * ctx.signal_mean()) * (p / (1.0 - p)).ln();
            let weight = 1.0 - ctx.conditional_error(beta);
            assert_abs_diff_eq!(weight, p, epsilon = 1e-12);
            let oracle = fock_mixture_entropy(weight, ctx.eve_amplitude(), 60);
            assert_abs_diff_eq!(ctx.eve_holevo(beta), oracle, epsilon = 1e-10);
        }
        let unconditioned = ctx.clone().with_eve(EveModel::Unconditioned);
        let oracle = fock_mixture_entropy(0.5, unconditioned.eve_amplitude(), 60);
        assert_abs_diff_eq!(unconditioned.eve_holevo(0.3), oracle, epsilon = 1e-10);
    }
}

#[test]
fn acceptance_matches_direct_integration() {
    for conv in [QuadratureConvention::QUARTER, QuadratureConvention::HALF] {
        let ctx = SecurityContext::new(0.8, 0.64).with_convention(conv);
        let t = 1.18;
        let tail = simpson(|b| ctx.outcome_density(b), t, 12.0, 200_000);
        assert_abs_diff_eq!(ctx.acceptance_probability_at(t), tail, epsilon = 1e-10);
    }
}

#[test]
fn error_rate_frozen_values() {
    // 40-digit reference values
    let ctx = SecurityContext::new(0.8, 0.64);
    assert_abs_diff_eq!(
        ctx.error_rate_at(0.0),
        0.100_272_567_954_442_093_052_168_302_799_552,
        epsilon = 1e-14
    );
    assert_abs_diff_eq!(ctx.acceptance_probability_at(0.5), 0.621_565_091_794_350_002_772, epsilon = 1e-14);
    assert_abs_diff_eq!(ctx.error_rate_at(0.5), 0.018_186_098_910_285_592_136_760, epsilon = 1e-14);
    assert_abs_diff_eq!(ctx.acceptance_probability_at(1.18), 0.140_207_409_109_214_854_768, epsilon = 1e-14);
    assert_abs_diff_eq!(ctx.error_rate_at(1.18), 0.000_972_266_881_699_639_656_558, epsilon = 1e-15);
    let half = ctx.with_convention(QuadratureConvention::HALF);
    assert_abs_diff_eq!(half.error_rate_at(0.0), 0.182_707_085_438_929_343_070_147, epsilon = 1e-14);
}

#[test]
fn binary_entropy_frozen_value() {
    assert_abs_diff_eq!(
        binary_entropy(0.11).unwrap(),
        0.499_915_958_164_527_995_640_499_594,
        epsilon = 1e-14
    );
}

#[test]
fn posterior_error_integrates_to_error_rate() {
    let settings = QuadratureSettings::default();
    for (alpha, eta) in [(0.8, 0.64), (0.5, 0.3), (1.2, 0.9), (0.3, 1.0)] {
        for conv in [QuadratureConvention::QUARTER, QuadratureConvention::HALF] {
            for eps in [0.0, 0.05] {
                let ctx = SecurityContext::new(alpha, eta)
                    .with_convention(conv)
                    .with_excess_noise(eps);
                for ti in 0..=8 {
                    let t = 0.25 * ti as f64;
                    let hi = t.max(ctx.signal_mean()) + 14.0 * ctx.outcome_std();
                    let num = cvqkd_core::numerics::integrate(
                        |b| ctx.conditional_error(b) * ctx.outcome_density(b),
                        t,
                        hi,
                        &settings,
                    )
                    .unwrap()
                    .value;
                    let ratio = num / ctx.acceptance_probability_at(t);
                    assert_abs_diff_eq!(ratio, ctx.error_rate_at(t), epsilon = 1e-9);
                }
            }
        }
    }
}

#[test]
fn key_rate_stable_under_node_doubling() {
    let settings = QuadratureSettings::default();
    for ctx in [
        SecurityContext::rooftop(),
        SecurityContext::new(0.8, 0.64),
        SecurityContext::rooftop().with_cascade(CascadeModel::Ideal).with_alpha(1.3),
    ] {
        for rule in [AcceptanceRule::PositiveContributions, AcceptanceRule::Threshold] {
            let a = key_rate(&ctx, &settings, rule).unwrap().key_rate;
            let b = key_rate(&ctx, &settings.doubled(), rule).unwrap().key_rate;
            assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn key_rate_decreases_with_reconciliation_inefficiency() {
    let settings = QuadratureSettings::default();
    let mut last = f64::INFINITY;
    for i in 0..=10 {
        let f = 1.0 + 0.05 * i as f64;
        let ctx = SecurityContext::rooftop().with_cascade(CascadeModel::Constant(f));
        let g = key_rate(&ctx, &settings, AcceptanceRule::PositiveContributions)
            .unwrap()
            .key_rate;
        assert!(g <= last, "f = {f}: {g} > {last}");
        last = g;
    }
}

#[test]
fn loss_never_helps() {
    let settings = QuadratureSettings::default();
    let ideal = SecurityContext::rooftop().with_cascade(CascadeModel::Ideal);
    let lossless = SecurityContext { eta: 1.0, ..ideal.clone() }.with_threshold(0.0);
    let g_lossless = key_rate(&lossless, &settings, AcceptanceRule::Threshold)
        .unwrap()
        .key_rate;
    for eta in [0.2, 0.5, 0.64, 0.9] {
        let lossy = SecurityContext { eta, ..ideal.clone() };
        let g = key_rate(&lossy, &settings, AcceptanceRule::PositiveContributions)
            .unwrap()
            .key_rate;
        assert!(g_lossless >= g, "eta = {eta}");
    }
    // nothing leaks on a lossless line, so G = 1 − E[H(e)]
    let expected = 1.0
        - simpson(
            |b| binary_entropy(lossless.conditional_error(b)).unwrap() * lossless.outcome_density(b),
            0.0,
            12.0,
            200_000,
        );
    assert_abs_diff_eq!(g_lossless, expected, epsilon = 1e-8);
}
