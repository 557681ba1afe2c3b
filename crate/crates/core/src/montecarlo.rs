//! End-to-end simulated runs: generate a session, calibrate it, postselect,
//! decode by sign and compare with the analytic model.

use std::io::{self, Write};

use crate::channel::ChannelParams;
use crate::error::{ensure_domain, Error, Result};
use crate::homodyne::{calibrate, generate_session, Drift, FramePlan, PulseRecord, SessionConfig};
use crate::qstate::QuadratureConvention;
use crate::security::{CascadeModel, EveModel, SecurityContext};

/// Smallest run accepted by [`run_experiment`].
pub const MIN_PULSES: usize = 1_000;
/// Accepted outcomes needed for a plug-in key-rate estimate.
pub const MIN_ACCEPTED_FOR_KEY_RATE: usize = 1_000;

/// How the accepted-outcome histogram is binned.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Binning {
    /// `2 · IQR · n^(−1/3)`.
    #[default]
    FreedmanDiaconis,
    Width(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_pulses: usize,
    pub alpha: f64,
    pub channel: ChannelParams,
    pub threshold: f64,
    pub seed: u64,
    pub convention: QuadratureConvention,
    pub plan: FramePlan,
    pub drift: Drift,
    /// Subtract the local vacuum level before postselection.
    pub calibrate: bool,
    pub binning: Binning,
}

impl ExperimentConfig {
    pub fn new(n_pulses: usize, alpha: f64, channel: ChannelParams, threshold: f64, seed: u64) -> Self {
        Self {
            n_pulses,
            alpha,
            channel,
            threshold,
            seed,
            convention: QuadratureConvention::default(),
            plan: FramePlan::default(),
            drift: Drift::None,
            calibrate: true,
            binning: Binning::default(),
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if self.n_pulses < MIN_PULSES {
            bad.push(format!("n_pulses = {} must be >= {MIN_PULSES}", self.n_pulses));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            bad.push(format!("alpha = {} must be finite and >= 0", self.alpha));
        }
        if !(self.threshold >= 0.0) {
            bad.push(format!("threshold = {} must be >= 0", self.threshold));
        }
        if let Binning::Width(w) = self.binning {
            if !(w > 0.0) {
                bad.push(format!("histogram bin width {w} must be > 0"));
            }
        }
        bad.extend(self.channel.problems());
        bad.extend(self.plan.problems());
        bad
    }

    /// Variance added to calibrated outcomes by the noisy vacuum-level
    /// estimate, in shot-noise units.
    pub fn calibration_noise(&self) -> f64 {
        if self.calibrate {
            1.0 / self.plan.calibration_window as f64
        } else {
            0.0
        }
    }

    fn session_config(&self) -> SessionConfig {
        SessionConfig {
            n_signals: self.n_pulses,
            alpha: self.alpha,
            channel: self.channel,
            plan: self.plan,
            convention: self.convention,
            drift: self.drift,
            seed: self.seed,
        }
    }
}

/// Histogram of accepted `|β|` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lower: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn build(values: &mut [f64], lower: f64, binning: Binning) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let width = match binning {
            Binning::Width(w) => w,
            Binning::FreedmanDiaconis => {
                let q = |p: f64| values[((n - 1) as f64 * p).round() as usize];
                let iqr = q(0.75) - q(0.25);
                let w = 2.0 * iqr / (n as f64).cbrt();
                if w > 0.0 {
                    w
                } else {
                    (values[n - 1] - lower).max(f64::MIN_POSITIVE)
                }
            }
        };
        let bins = (((values[n - 1] - lower) / width).floor() as usize) + 1;
        let mut counts = vec![0u64; bins];
        for &v in values.iter() {
            let i = (((v - lower) / width).floor() as usize).min(bins - 1);
            counts[i] += 1;
        }
        Some(Self { lower, width, counts })
    }

    pub fn centers(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.lower + (i as f64 + 0.5) * self.width, c))
    }
}

/// Empirical and analytic statistics of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub alpha: f64,
    pub eta: f64,
    pub threshold: f64,
    pub vacuum_variance: f64,
    pub n_sent: usize,
    pub n_accepted: usize,
    pub n_errors: usize,
    /// `None` when nothing was accepted.
    pub empirical_error: Option<f64>,
    pub empirical_acceptance: f64,
    /// Analytic values for a shot-noise-limited channel, including the
    /// known calibration noise.
    pub analytic_error: f64,
    pub analytic_acceptance: f64,
    pub reference_excess_noise: f64,
    /// `(error, acceptance)` discrepancies in binomial standard deviations.
    pub z_scores: (Option<f64>, f64),
    pub histogram: Option<Histogram>,
}

pub const SUMMARY_CSV_HEADER: &str = "alpha,eta,threshold,vacuum_variance,n_sent,n_accepted,\
n_errors,empirical_error,empirical_acceptance,analytic_error,analytic_acceptance,z_error,z_acceptance";

fn binomial_z(observed: f64, expected: f64, n: usize) -> Option<f64> {
    let var = expected * (1.0 - expected) / n as f64;
    if n == 0 {
        None
    } else if var > 0.0 {
        Some((observed - expected) / var.sqrt())
    } else if observed == expected {
        Some(0.0)
    } else {
        Some(f64::INFINITY.copysign(observed - expected))
    }
}

impl SessionSummary {
    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        format!(
            "{:?},{:?},{:?},{:?},{},{},{},{},{:?},{:?},{:?},{},{:?}",
            self.alpha,
            self.eta,
            self.threshold,
            self.vacuum_variance,
            self.n_sent,
            self.n_accepted,
            self.n_errors,
            opt(self.empirical_error),
            self.empirical_acceptance,
            self.analytic_error,
            self.analytic_acceptance,
            opt(self.z_scores.0),
            self.z_scores.1
        )
    }

    /// Appends a row, writing the header first when `with_header` is set.
    pub fn append_csv<W: Write>(&self, mut out: W, with_header: bool) -> io::Result<()> {
        if with_header {
            writeln!(out, "{SUMMARY_CSV_HEADER}")?;
        }
        writeln!(out, "{}", self.to_csv_row())
    }

    /// Largest `|z|` over error and acceptance.
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.0.unwrap_or(0.0).abs().max(self.z_scores.1.abs())
    }
}

/// Postselects and scores an already generated (and possibly calibrated)
/// session at `threshold`.
pub fn summarize(
    records: &[PulseRecord],
    config: &ExperimentConfig,
    threshold: f64,
) -> Result<SessionSummary> {
    ensure_domain(threshold >= 0.0, "threshold", threshold, "must be non-negative")?;
    let eta = config.channel.overall_transmittance()?;
    let mut accepted = Vec::new();
    let mut n_sent = 0usize;
    let mut n_errors = 0usize;
    for r in records.iter().filter(|r| r.is_signal()) {
        n_sent += 1;
        let beta = if config.calibrate {
            r.calibrated.ok_or_else(|| {
                Error::Validation(vec![format!("record {} has not been calibrated", r.index)])
            })?
        } else {
            r.raw
        };
        if beta.abs() > threshold {
            accepted.push(beta.abs());
            let bob = beta > 0.0;
            if Some(bob) != r.alice_bit {
                n_errors += 1;
            }
        }
    }
    if n_sent == 0 {
        return Err(Error::InsufficientData("session holds no signal records".into()));
    }
    let n_accepted = accepted.len();

    let reference_excess_noise = config.calibration_noise();
    let analytic = SecurityContext::new(config.alpha, eta)
        .with_convention(config.convention)
        .with_excess_noise(reference_excess_noise)
        .with_threshold(threshold);
    let analytic_error = analytic.error_rate_postselected()?;
    let analytic_acceptance = analytic.acceptance_probability()?;

    let empirical_acceptance = n_accepted as f64 / n_sent as f64;
    let empirical_error = (n_accepted > 0).then(|| n_errors as f64 / n_accepted as f64);
    let z_error = empirical_error.and_then(|e| binomial_z(e, analytic_error, n_accepted));
    let z_acceptance =
        binomial_z(empirical_acceptance, analytic_acceptance, n_sent).unwrap_or(f64::NAN);

    Ok(SessionSummary {
        alpha: config.alpha,
        eta,
        threshold,
        vacuum_variance: config.convention.vacuum_variance(),
        n_sent,
        n_accepted,
        n_errors,
        empirical_error,
        empirical_acceptance,
        analytic_error,
        analytic_acceptance,
        reference_excess_noise,
        z_scores: (z_error, z_acceptance),
        histogram: Histogram::build(&mut accepted, threshold, config.binning),
    })
}

/// Generates the session (calibrated when requested) behind an experiment.
pub fn simulate_records(config: &ExperimentConfig) -> Result<Vec<PulseRecord>> {
    let bad = config.problems();
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    let records = generate_session(&config.session_config())?;
    if config.calibrate {
        calibrate(&records, config.plan.calibration_window)
    } else {
        Ok(records)
    }
}

/// Runs one experiment and returns its summary with the session records.
pub fn run_experiment_with_records(
    config: &ExperimentConfig,
) -> Result<(SessionSummary, Vec<PulseRecord>)> {
    let records = simulate_records(config)?;
    let summary = summarize(&records, config, config.threshold)?;
    Ok((summary, records))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<SessionSummary> {
    run_experiment_with_records(config).map(|(s, _)| s)
}

/// Scores one simulated session at each threshold.
pub fn threshold_sweep(config: &ExperimentConfig, thresholds: &[f64]) -> Result<Vec<SessionSummary>> {
    let records = simulate_records(config)?;
    thresholds
        .iter()
        .map(|&t| summarize(&records, config, t))
        .collect()
}

/// Plug-in key rate: the empirical histogram of accepted outcomes stands in
/// for `p(β)`, while `e(β)` and Eve's term are analytic. Only bins with
/// positive pointwise information contribute. Negative totals are clamped
/// to zero.
pub fn empirical_key_rate(
    summary: &SessionSummary,
    cascade: &CascadeModel,
    eve: EveModel,
) -> Result<f64> {
    if summary.n_accepted < MIN_ACCEPTED_FOR_KEY_RATE {
        return Err(Error::InsufficientData(format!(
            "{} accepted outcomes are too few for a key-rate estimate (need {MIN_ACCEPTED_FOR_KEY_RATE})",
            summary.n_accepted
        )));
    }
    let hist = summary
        .histogram
        .as_ref()
        .ok_or_else(|| Error::InsufficientData("summary carries no histogram".into()))?;
    let ctx = SecurityContext::new(summary.alpha, summary.eta)
        .with_cascade(cascade.clone())
        .with_eve(eve)
        .with_convention(QuadratureConvention::new(summary.vacuum_variance)?);
    ctx.validate()?;
    let g: f64 = hist
        .centers()
        .map(|(beta, count)| {
            let info = ctx.key_information(beta);
            if info > 0.0 {
                info * count as f64
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / summary.n_sent as f64;
    Ok(g.max(0.0))
}
