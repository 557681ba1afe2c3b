use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use cvqkd_core::channel::unbalance_excess_noise;
use cvqkd_core::homodyne::{
    calibrate, generate_session, read_session_csv, write_session_csv, SessionConfig,
};
use cvqkd_core::montecarlo::{empirical_key_rate, run_experiment_with_records, Binning, ExperimentConfig};
use cvqkd_core::homodyne::estimate_excess_noise;
use cvqkd_core::optimizer::{
    alpha_curve, error_rate_curve, key_rate_curve, optimal_alpha, optimal_threshold,
};
use cvqkd_core::security::{
    calibrate_constant_efficiency, key_rate, AcceptanceRule, CascadeModel, SecurityContext,
    KEY_RATE_CSV_HEADER,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

impl Artifact {
    fn text(name: &str, contents: String) -> Self {
        Self { name: name.into(), contents: contents.into_bytes() }
    }
}

/// What a command produced: files plus a short human-readable summary.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: String,
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key}={value}");
}

/// Security context for the configured link, with the reconciliation model
/// replaced by the calibrated constant when a target rate is given.
fn context(cfg: &RunConfig) -> CliResult<(SecurityContext, Option<f64>)> {
    let ctx = cfg.security_context()?;
    match cfg.calibrate_to {
        None => Ok((ctx, None)),
        Some(target) => {
            let f = calibrate_constant_efficiency(&ctx, target, &cfg.quadrature())?;
            Ok((ctx.with_cascade(CascadeModel::Constant(f)), Some(f)))
        }
    }
}

pub fn keyrate(cfg: &RunConfig) -> CliResult<Outcome> {
    let (ctx, calibrated) = context(cfg)?;
    let settings = cfg.quadrature();
    let optimum = optimal_threshold(&ctx, &settings)?;
    let report = match cfg.threshold {
        None => key_rate(&ctx, &settings, AcceptanceRule::PositiveContributions)?,
        Some(t) => key_rate(&ctx.clone().with_threshold(t), &settings, AcceptanceRule::Threshold)?,
    };
    let pulse_rate = cfg.plan.pulse_rate;
    let throughput = report.throughput(pulse_rate)?;

    let mut text = report.to_key_value();
    kv(&mut text, "optimal_threshold", format!("{:?}", optimum.argument));
    if let Some(f) = calibrated {
        kv(&mut text, "calibrated_efficiency", format!("{f:?}"));
    }
    kv(&mut text, "pulse_rate", format!("{pulse_rate:?}"));
    kv(&mut text, "throughput_bps", format!("{throughput:?}"));
    let csv = format!("{KEY_RATE_CSV_HEADER},throughput_bps\n{},{throughput:?}\n", report.to_csv_row());

    let summary = format!(
        "G = {:.6} bits/pulse, threshold {:.4}, throughput {:.1} bit/s at {} Hz",
        report.key_rate,
        report.accepted_from.unwrap_or(f64::INFINITY),
        throughput,
        pulse_rate
    );
    Ok(Outcome {
        artifacts: vec![Artifact::text("keyrate.txt", text), Artifact::text("keyrate.csv", csv)],
        summary,
    })
}

pub fn curves(cfg: &RunConfig) -> CliResult<Outcome> {
    let (ctx, _) = context(cfg)?;
    let settings = cfg.quadrature();
    let alpha = alpha_curve(&cfg.eta_grid, &ctx, &cfg.alpha_search, &settings)?;
    let errors = error_rate_curve(&cfg.threshold_grid, &ctx)?;
    let keys = key_rate_curve(&cfg.threshold_grid, &ctx, &settings)?;
    Ok(Outcome {
        artifacts: vec![
            Artifact::text("alpha_curve.csv", alpha.to_csv()),
            Artifact::text("error_rate_curve.csv", errors.to_csv()),
            Artifact::text("key_rate_curve.csv", keys.to_csv()),
        ],
        summary: format!(
            "{} eta points, {} thresholds",
            cfg.eta_grid.len(),
            cfg.threshold_grid.len()
        ),
    })
}

pub fn optimize_alpha(cfg: &RunConfig) -> CliResult<Outcome> {
    let (ctx, _) = context(cfg)?;
    let r = optimal_alpha(&ctx, &cfg.alpha_search, &cfg.quadrature())?;
    let mut text = String::new();
    kv(&mut text, "eta", format!("{:?}", ctx.eta));
    kv(&mut text, "alpha_opt", format!("{:?}", r.argument));
    kv(&mut text, "key_rate", format!("{:?}", r.objective));
    kv(&mut text, "iterations", r.iterations);
    kv(&mut text, "converged", r.converged);
    kv(&mut text, "cascade", &ctx.cascade);
    Ok(Outcome {
        artifacts: vec![Artifact::text("alpha_opt.txt", text)],
        summary: format!("alpha_opt = {:.4} (G = {:.6}) at eta = {:.4}", r.argument, r.objective, ctx.eta),
    })
}

pub fn optimize_threshold(cfg: &RunConfig) -> CliResult<Outcome> {
    let (ctx, _) = context(cfg)?;
    let r = optimal_threshold(&ctx, &cfg.quadrature())?;
    let mut text = String::new();
    kv(&mut text, "alpha", format!("{:?}", ctx.alpha));
    kv(&mut text, "eta", format!("{:?}", ctx.eta));
    kv(&mut text, "threshold_opt", format!("{:?}", r.argument));
    kv(&mut text, "key_rate", format!("{:?}", r.objective));
    kv(&mut text, "iterations", r.iterations);
    kv(&mut text, "converged", r.converged);
    Ok(Outcome {
        artifacts: vec![Artifact::text("threshold_opt.txt", text)],
        summary: format!("threshold_opt = {:.4} (G = {:.6})", r.argument, r.objective),
    })
}

pub fn simulate(cfg: &RunConfig) -> CliResult<Outcome> {
    let (ctx, _) = context(cfg)?;
    let threshold = match cfg.threshold {
        Some(t) => t,
        None => optimal_threshold(&ctx, &cfg.quadrature())?.argument.min(1e3),
    };
    let experiment = ExperimentConfig {
        convention: ctx.convention,
        plan: cfg.plan,
        calibrate: cfg.calibrate,
        binning: cfg.bin_width.map_or(Binning::FreedmanDiaconis, Binning::Width),
        ..ExperimentConfig::new(cfg.pulses, cfg.alpha, cfg.channel, threshold, cfg.seed)
    };
    let (s, records) = run_experiment_with_records(&experiment)?;

    let mut summary_csv = Vec::new();
    s.append_csv(&mut summary_csv, true)
        .map_err(|e| CliError::io("summary.csv", e))?;
    let mut hist_csv = String::from("lower,upper,count\n");
    if let Some(h) = &s.histogram {
        for (i, c) in h.counts.iter().enumerate() {
            let lo = h.lower + i as f64 * h.width;
            let _ = writeln!(hist_csv, "{lo:?},{:?},{c}", lo + h.width);
        }
    }
    let plugin = empirical_key_rate(&s, &ctx.cascade, ctx.eve).ok();

    let mut text = String::new();
    kv(&mut text, "threshold", format!("{threshold:?}"));
    kv(&mut text, "n_sent", s.n_sent);
    kv(&mut text, "n_accepted", s.n_accepted);
    kv(&mut text, "n_errors", s.n_errors);
    kv(&mut text, "empirical_error", s.empirical_error.map(|e| format!("{e:?}")).unwrap_or_default());
    kv(&mut text, "analytic_error", format!("{:?}", s.analytic_error));
    kv(&mut text, "empirical_acceptance", format!("{:?}", s.empirical_acceptance));
    kv(&mut text, "analytic_acceptance", format!("{:?}", s.analytic_acceptance));
    kv(&mut text, "z_error", s.z_scores.0.map(|z| format!("{z:?}")).unwrap_or_default());
    kv(&mut text, "z_acceptance", format!("{:?}", s.z_scores.1));
    kv(&mut text, "reference_excess_noise", format!("{:?}", s.reference_excess_noise));
    kv(&mut text, "plugin_key_rate", plugin.map(|g| format!("{g:?}")).unwrap_or_default());

    let mut artifacts = vec![
        Artifact::text("simulate.txt", text),
        Artifact { name: "summary.csv".into(), contents: summary_csv },
        Artifact::text("histogram.csv", hist_csv),
    ];
    if cfg.dump_session {
        let mut buf = Vec::new();
        write_session_csv(&records, &mut buf).map_err(|e| CliError::io("session.csv", e))?;
        artifacts.push(Artifact { name: "session.csv".into(), contents: buf });
    }
    let z = |v: Option<f64>| v.map_or("n/a".to_string(), |z| format!("{z:+.2}"));
    Ok(Outcome {
        artifacts,
        summary: format!(
            "{} of {} accepted; error z = {}, acceptance z = {}",
            s.n_accepted,
            s.n_sent,
            z(s.z_scores.0),
            z(Some(s.z_scores.1))
        ),
    })
}

/// Estimates excess noise from a session file, or from a freshly simulated
/// session when no input is given.
pub fn noise(cfg: &RunConfig, input: Option<&PathBuf>) -> CliResult<Outcome> {
    cfg.validate()?;
    let window = cfg.plan.calibration_window;
    let records = match input {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            read_session_csv(std::io::BufReader::new(file))?
        }
        None => {
            let session = SessionConfig {
                plan: cfg.plan,
                convention: cfg.convention().map_err(|e| CliError::Config(vec![e]))?,
                ..SessionConfig::new(cfg.pulses, cfg.alpha, cfg.channel, cfg.seed)
            };
            generate_session(&session)?
        }
    };
    let records = if records.iter().all(|r| r.calibrated.is_some()) {
        records
    } else {
        calibrate(&records, window)?
    };
    let est = estimate_excess_noise(&records)?;
    // the calibration itself adds 1/w to the signal and the vacuum alike,
    // so the ratio is unaffected
    let unbalance = unbalance_excess_noise(cfg.channel.unbalance)?;

    let mut text = String::new();
    kv(&mut text, "epsilon", format!("{:?}", est.epsilon));
    kv(&mut text, "ci_low", format!("{:?}", est.confidence_interval.0));
    kv(&mut text, "ci_high", format!("{:?}", est.confidence_interval.1));
    kv(&mut text, "half_width", format!("{:?}", est.half_width()));
    kv(&mut text, "epsilon_positive", format!("{:?}", est.positive.epsilon));
    kv(&mut text, "epsilon_negative", format!("{:?}", est.negative.epsilon));
    kv(&mut text, "n_signal", est.n_signal);
    kv(&mut text, "n_vacuum", est.n_vacuum);
    kv(&mut text, "configured_excess_noise", format!("{:?}", cfg.channel.excess_noise));
    kv(&mut text, "unbalance", format!("{:?}", cfg.channel.unbalance));
    kv(&mut text, "unbalance_contribution", format!("{unbalance:?}"));
    kv(&mut text, "consistent_with_zero", est.covers(0.0));
    Ok(Outcome {
        artifacts: vec![Artifact::text("noise.txt", text)],
        summary: format!(
            "epsilon = {:.4} [{:.4}, {:.4}] from {} signal records; unbalance contributes {:.4}",
            est.epsilon, est.confidence_interval.0, est.confidence_interval.1, est.n_signal, unbalance
        ),
    })
}
