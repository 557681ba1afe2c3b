//! Information-theoretic analysis of postselected BPSK key exchange under a
//! beamsplitter attack.
//!
//! Bob's outcome `β` is a two-Gaussian mixture centred on `±√η α` with
//! variance `v(1 + ε)` (see [`QuadratureConvention`]). Folding the negative
//! branch onto `|β|` (with a bit flip) gives the density
//!
//! ```text
//! p(β) = N(β; a, s²) + N(β; −a, s²),   β ≥ 0,   a = √η α,
//! ```
//!
//! and the posterior probability that Bob's sign decision is wrong,
//! `e(β) = 1 / (1 + exp(2aβ/s²))`. Eve holds the reflected part `±γ`,
//! `γ = √(1−η) α`, of every pulse. The secret fraction per pulse is
//!
//! ```text
//! G = ∫ (1 − f[e(β)] H[e(β)] − S_E(β)) p(β) dβ
//! ```
//!
//! over the accepted region, where `f` is the reconciliation efficiency and
//! `S_E` is Eve's Holevo information.

use std::fmt;

use libm::erfc;

use crate::error::{ensure_domain, Error, Result};
use crate::numerics::{brent_root, integrate, Quadrature, QuadratureSettings};
use crate::qstate::{coherent_overlap, two_state_entropy, xlog2x, QuadratureConvention};

/// Error-correction efficiency `f[e] ≥ 1` of the reconciliation protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum CascadeModel {
    /// Shannon limit, `f ≡ 1`.
    Ideal,
    Constant(f64),
    /// Piecewise-linear `f` over `(error rate, efficiency)` knots with
    /// constant extrapolation outside the knot range.
    Table(Vec<(f64, f64)>),
}

impl CascadeModel {
    /// Efficiencies typical of CASCADE at 1 %–15 % error rate.
    pub fn default_table() -> Self {
        CascadeModel::Table(vec![(0.01, 1.16), (0.05, 1.16), (0.10, 1.22), (0.15, 1.35)])
    }

    pub fn problems(&self) -> Vec<String> {
        let mut bad = Vec::new();
        match self {
            CascadeModel::Ideal => {}
            CascadeModel::Constant(f) => {
                if !(*f >= 1.0 && f.is_finite()) {
                    bad.push(format!("cascade efficiency {f} must be >= 1"));
                }
            }
            CascadeModel::Table(knots) => {
                if knots.is_empty() {
                    bad.push("cascade table must have at least one knot".into());
                }
                for &(e, f) in knots {
                    if !(0.0..=1.0).contains(&e) {
                        bad.push(format!("cascade table error rate {e} must lie in [0, 1]"));
                    }
                    if !(f >= 1.0 && f.is_finite()) {
                        bad.push(format!("cascade table efficiency {f} must be >= 1"));
                    }
                }
                for pair in knots.windows(2) {
                    if pair[1].0 <= pair[0].0 {
                        bad.push(format!(
                            "cascade table error rates must increase ({} after {})",
                            pair[1].0, pair[0].0
                        ));
                    }
                    if pair[1].1 < pair[0].1 {
                        bad.push(format!(
                            "cascade table efficiency must not decrease ({} after {})",
                            pair[1].1, pair[0].1
                        ));
                    }
                }
            }
        }
        bad
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.problems();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    pub fn efficiency(&self, e: f64) -> f64 {
        match self {
            CascadeModel::Ideal => 1.0,
            CascadeModel::Constant(f) => *f,
            CascadeModel::Table(knots) => {
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if e <= first.0 {
                    return first.1;
                }
                if e >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|k| k.0 <= e);
                let (lo, hi) = (knots[i - 1], knots[i]);
                lo.1 + (hi.1 - lo.1) * (e - lo.0) / (hi.0 - lo.0)
            }
        }
    }

    /// Largest efficiency the model can return.
    pub fn max_efficiency(&self) -> f64 {
        match self {
            CascadeModel::Ideal => 1.0,
            CascadeModel::Constant(f) => *f,
            CascadeModel::Table(knots) => knots.iter().map(|k| k.1).fold(1.0, f64::max),
        }
    }

    /// Parses `error_rate,efficiency` lines; blank lines and `#` comments are skipped.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut knots = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: n + 1,
                    reason: format!("`{s}`: {e}"),
                })
            };
            match parts[..] {
                [e, f] => knots.push((parse(e)?, parse(f)?)),
                _ => {
                    return Err(Error::Parse {
                        line: n + 1,
                        reason: "expected `error_rate,efficiency`".into(),
                    })
                }
            }
        }
        let model = CascadeModel::Table(knots);
        model.validate()?;
        Ok(model)
    }
}

impl Default for CascadeModel {
    fn default() -> Self {
        Self::default_table()
    }
}

impl fmt::Display for CascadeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CascadeModel::Ideal => write!(f, "ideal"),
            CascadeModel::Constant(v) => write!(f, "constant:{v}"),
            CascadeModel::Table(knots) => {
                write!(f, "table:")?;
                for (i, (e, v)) in knots.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{e}/{v}")?;
                }
                Ok(())
            }
        }
    }
}

/// What Eve's entropy term is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EveModel {
    /// Holevo information about Alice's equiprobable bit: the entropy of
    /// `½|γ⟩⟨γ| + ½|−γ⟩⟨−γ|`, independent of Bob's outcome.
    #[default]
    Unconditioned,
    /// Entropy of Eve's state weighted by the posterior of Alice's bit given
    /// Bob's outcome, `(1 − e(β), e(β))`.
    PosteriorConditioned,
}

impl EveModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            EveModel::Unconditioned => "unconditioned",
            EveModel::PosteriorConditioned => "posterior",
        }
    }
}

/// Which outcomes count towards the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AcceptanceRule {
    /// Accept `|β| ≥ threshold` only where the pointwise contribution is
    /// positive.
    #[default]
    PositiveContributions,
    /// Accept every `|β| ≥ threshold`, including negative contributions.
    Threshold,
}

/// Parameters shared by all information-theoretic quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SecurityContext {
    /// Amplitude Alice sends.
    pub alpha: f64,
    /// Overall transmittance; the lost `1 − η` goes to Eve.
    pub eta: f64,
    /// Postselection threshold `β₀` on `|β|`.
    pub threshold: f64,
    pub cascade: CascadeModel,
    pub eve: EveModel,
    pub convention: QuadratureConvention,
    /// Noise on Bob's outcomes in shot-noise units; Eve's term ignores it.
    pub excess_noise: f64,
}

impl SecurityContext {
    pub fn new(alpha: f64, eta: f64) -> Self {
        Self {
            alpha,
            eta,
            threshold: 0.0,
            cascade: CascadeModel::default(),
            eve: EveModel::default(),
            convention: QuadratureConvention::default(),
            excess_noise: 0.0,
        }
    }

    /// The 100 m rooftop link at its optimal amplitude, in the normalization
    /// used for its key-rate analysis.
    pub fn rooftop() -> Self {
        Self {
            convention: QuadratureConvention::HALF,
            ..Self::new(0.80, 0.64)
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_cascade(mut self, cascade: CascadeModel) -> Self {
        self.cascade = cascade;
        self
    }

    pub fn with_eve(mut self, eve: EveModel) -> Self {
        self.eve = eve;
        self
    }

    pub fn with_convention(mut self, convention: QuadratureConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_excess_noise(mut self, excess_noise: f64) -> Self {
        self.excess_noise = excess_noise;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn problems(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            bad.push(format!("alpha = {} must be finite and >= 0", self.alpha));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            bad.push(format!("eta = {} must lie in (0, 1]", self.eta));
        }
        if !(self.threshold >= 0.0) {
            bad.push(format!("threshold = {} must be >= 0", self.threshold));
        }
        if !(self.excess_noise >= 0.0 && self.excess_noise.is_finite()) {
            bad.push(format!("excess_noise = {} must be >= 0", self.excess_noise));
        }
        bad.extend(self.cascade.problems());
        bad
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.problems();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// `√η α`, the mean of Bob's outcomes.
    pub fn signal_mean(&self) -> f64 {
        self.eta.sqrt() * self.alpha
    }

    /// `γ = √(1−η) α`, the amplitude Eve splits off.
    pub fn eve_amplitude(&self) -> f64 {
        (1.0 - self.eta).max(0.0).sqrt() * self.alpha
    }

    pub fn outcome_std(&self) -> f64 {
        self.convention.outcome_std(self.excess_noise)
    }

    fn erfc_arg_scale(&self) -> f64 {
        1.0 / (self.outcome_std() * std::f64::consts::SQRT_2)
    }

    /// Probability that `|β|` exceeds `threshold`.
    pub fn acceptance_probability_at(&self, threshold: f64) -> f64 {
        let a = self.signal_mean();
        let k = self.erfc_arg_scale();
        0.5 * (erfc((threshold - a) * k) + erfc((threshold + a) * k))
    }

    pub fn acceptance_probability(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.acceptance_probability_at(self.threshold))
    }

    /// Error rate among outcomes with `|β| > threshold`:
    /// `½ erfc((β₀ + a)/(s√2)) / P(β₀)`.
    pub fn error_rate_at(&self, threshold: f64) -> f64 {
        let a = self.signal_mean();
        let k = self.erfc_arg_scale();
        let wrong = 0.5 * erfc((threshold + a) * k);
        let accepted = self.acceptance_probability_at(threshold);
        if accepted > 0.0 {
            wrong / accepted
        } else if a > 0.0 {
            0.0
        } else {
            0.5
        }
    }

    pub fn error_rate_postselected(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.error_rate_at(self.threshold))
    }

    /// Posterior probability that the sign of `β` disagrees with Alice's bit.
    pub fn conditional_error(&self, beta: f64) -> f64 {
        let s2 = self.convention.outcome_variance(self.excess_noise);
        let llr = 2.0 * self.signal_mean() * beta.abs() / s2;
        1.0 / (1.0 + llr.exp())
    }

    /// Folded outcome density on `β ≥ 0`.
    pub fn outcome_density(&self, beta: f64) -> f64 {
        let a = self.signal_mean();
        let s = self.outcome_std();
        let norm = 1.0 / (s * (std::f64::consts::TAU).sqrt());
        let g = |x: f64| (-0.5 * (x / s).powi(2)).exp();
        norm * (g(beta - a) + g(beta + a))
    }

    /// Eve's Holevo information (bits) for an outcome `β`.
    pub fn eve_holevo(&self, beta: f64) -> f64 {
        let overlap = coherent_overlap(self.eve_amplitude()).expect("amplitude is non-negative");
        let p = match self.eve {
            EveModel::Unconditioned => 0.5,
            EveModel::PosteriorConditioned => 1.0 - self.conditional_error(beta),
        };
        two_state_entropy(p, overlap).expect("weights and overlap are in range")
    }

    /// `1 − f[e] H[e] − S_E` at outcome `β`: Bob's reconciled information
    /// minus Eve's.
    pub fn key_information(&self, beta: f64) -> f64 {
        let e = self.conditional_error(beta);
        1.0 - self.cascade.efficiency(e) * binary_entropy_unchecked(e) - self.eve_holevo(beta)
    }

    /// Largest `|β|` worth examining: beyond it `e(β)` underflows and the
    /// pointwise information is saturated.
    fn saturation_outcome(&self) -> f64 {
        let a = self.signal_mean();
        let s2 = self.convention.outcome_variance(self.excess_noise);
        let sat = 750.0 * s2 / (2.0 * a);
        sat.max(a + 40.0 * self.outcome_std())
    }

    /// Smallest `β ≥ 0` from which the pointwise information is positive,
    /// or `None` if it never is.
    pub fn positive_region_start(&self) -> Result<Option<RegionStart>> {
        self.validate()?;
        if self.signal_mean() == 0.0 {
            return Ok(None);
        }
        let sat = self.saturation_outcome();
        if self.key_information(sat) <= 0.0 {
            return Ok(None);
        }
        if self.key_information(0.0) >= 0.0 {
            return Ok(Some(RegionStart { beta: 0.0, iterations: 0, bracket: (0.0, 0.0) }));
        }
        let mut hi = self.signal_mean().max(self.outcome_std());
        while self.key_information(hi) <= 0.0 {
            hi = (2.0 * hi).min(sat);
        }
        let root = brent_root(|b| self.key_information(b), 0.0, hi, 1e-12, 200)?;
        Ok(Some(RegionStart {
            beta: root.x,
            iterations: root.iterations,
            bracket: root.bracket,
        }))
    }
}

/// Zero crossing of the pointwise key information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStart {
    pub beta: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

/// Shannon entropy of a binary distribution, in bits.
pub fn binary_entropy(e: f64) -> Result<f64> {
    ensure_domain((0.0..=1.0).contains(&e), "e", e, "probability must lie in [0, 1]")?;
    Ok(binary_entropy_unchecked(e))
}

fn binary_entropy_unchecked(e: f64) -> f64 {
    xlog2x(e) + xlog2x(1.0 - e)
}

/// Secret bits per second at `pulse_rate` pulses per second.
pub fn throughput(key_rate: f64, pulse_rate: f64) -> Result<f64> {
    ensure_domain(key_rate >= 0.0, "key_rate", key_rate, "must be non-negative")?;
    ensure_domain(pulse_rate >= 0.0, "pulse_rate", pulse_rate, "must be non-negative")?;
    Ok(key_rate * pulse_rate)
}

/// Outcome of a key-rate evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateReport {
    pub alpha: f64,
    pub eta: f64,
    /// Threshold requested in the context.
    pub threshold: f64,
    /// Lower edge of the accepted region, `None` if nothing is accepted.
    pub accepted_from: Option<f64>,
    /// Secret bits per pulse.
    pub key_rate: f64,
    pub acceptance_probability: f64,
    /// Error rate of the accepted outcomes, `None` if nothing is accepted.
    pub error_rate: Option<f64>,
    pub cascade: String,
    pub eve: EveModel,
    pub vacuum_variance: f64,
    pub quadrature: Option<Quadrature>,
}

pub const KEY_RATE_CSV_HEADER: &str = "alpha,eta,threshold,accepted_from,key_rate,\
acceptance_probability,error_rate,cascade,eve,vacuum_variance";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

impl KeyRateReport {
    pub fn throughput(&self, pulse_rate: f64) -> Result<f64> {
        throughput(self.key_rate.max(0.0), pulse_rate)
    }

    /// `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        line("alpha", format!("{:?}", self.alpha));
        line("eta", format!("{:?}", self.eta));
        line("threshold", format!("{:?}", self.threshold));
        line("accepted_from", opt(self.accepted_from));
        line("key_rate", format!("{:?}", self.key_rate));
        line("acceptance_probability", format!("{:?}", self.acceptance_probability));
        line("error_rate", opt(self.error_rate));
        line("cascade", self.cascade.clone());
        line("eve", self.eve.as_str().to_string());
        line("vacuum_variance", format!("{:?}", self.vacuum_variance));
        out
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:?},{:?},{:?},{},{:?},{:?},{},{},{},{:?}",
            self.alpha,
            self.eta,
            self.threshold,
            opt(self.accepted_from),
            self.key_rate,
            self.acceptance_probability,
            opt(self.error_rate),
            self.cascade.replace(',', ";"),
            self.eve.as_str(),
            self.vacuum_variance
        )
    }
}

/// Integrates the pointwise key information against the folded outcome
/// density over the accepted region.
pub fn key_rate(
    ctx: &SecurityContext,
    settings: &QuadratureSettings,
    rule: AcceptanceRule,
) -> Result<KeyRateReport> {
    ctx.validate()?;
    settings.validate()?;
    let lower = match rule {
        AcceptanceRule::Threshold => Some(ctx.threshold),
        AcceptanceRule::PositiveContributions => ctx
            .positive_region_start()?
            .map(|start| start.beta.max(ctx.threshold)),
    };
    let mut report = KeyRateReport {
        alpha: ctx.alpha,
        eta: ctx.eta,
        threshold: ctx.threshold,
        accepted_from: lower,
        key_rate: 0.0,
        acceptance_probability: 0.0,
        error_rate: None,
        cascade: ctx.cascade.to_string(),
        eve: ctx.eve,
        vacuum_variance: ctx.convention.vacuum_variance(),
        quadrature: None,
    };
    let Some(lower) = lower else {
        return Ok(report);
    };
    let upper = lower.max(ctx.signal_mean()) + 12.0 * ctx.outcome_std();
    let q = integrate(
        |b| ctx.key_information(b) * ctx.outcome_density(b),
        lower,
        upper,
        settings,
    )
    .map_err(|e| match e {
        Error::NonConvergence(msg) => Error::NonConvergence(format!(
            "key-rate integral (alpha = {}, eta = {}, from {lower}): {msg}",
            ctx.alpha, ctx.eta
        )),
        other => other,
    })?;
    report.key_rate = q.value;
    report.acceptance_probability = ctx.acceptance_probability_at(lower);
    if report.acceptance_probability > 0.0 {
        report.error_rate = Some(ctx.error_rate_at(lower));
    }
    report.quadrature = Some(q);
    Ok(report)
}

/// Constant efficiency `f` for which the postselected key rate equals
/// `target` at the context's parameters.
pub fn calibrate_constant_efficiency(
    ctx: &SecurityContext,
    target: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    ensure_domain(target > 0.0, "target key rate", target, "must be positive")?;
    let g = |f: f64| -> Result<f64> {
        let c = ctx.clone().with_cascade(CascadeModel::Constant(f));
        Ok(key_rate(&c, settings, AcceptanceRule::PositiveContributions)?.key_rate)
    };
    let at_one = g(1.0)?;
    if at_one < target {
        return Err(Error::NonConvergence(format!(
            "key rate {at_one} with ideal reconciliation is already below the target {target}"
        )));
    }
    let mut hi = 1.5;
    while g(hi)? > target {
        hi = 1.0 + 2.0 * (hi - 1.0);
        if hi > 1e3 {
            return Err(Error::NonConvergence(
                "no efficiency up to 1000 brings the key rate down to the target".into(),
            ));
        }
    }
    // the closure cannot return Result through brent_root, so errors surface as NaN
    let root = brent_root(
        |f| g(f).map(|v| v - target).unwrap_or(f64::NAN),
        1.0,
        hi,
        1e-10,
        200,
    )?;
    if !root.fx.is_finite() {
        return Err(Error::NonConvergence(
            "key-rate evaluation failed during efficiency calibration".into(),
        ));
    }
    Ok(root.x)
}
