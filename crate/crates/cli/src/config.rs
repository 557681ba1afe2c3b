//! Run configuration: built-in defaults, the rooftop preset, a TOML file
//! with dotted keys, and command-line overrides, applied in that order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cvqkd_core::channel::ChannelParams;
use cvqkd_core::homodyne::FramePlan;
use cvqkd_core::numerics::QuadratureSettings;
use cvqkd_core::optimizer::AlphaSearch;
use cvqkd_core::qstate::QuadratureConvention;
use cvqkd_core::security::{CascadeModel, EveModel, SecurityContext};
use toml::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub channel: ChannelParams,
    pub alpha: f64,
    /// `None` places the threshold where the key information turns positive.
    pub threshold: Option<f64>,
    /// `default`, `ideal`, `constant:<f>` or `table:<path>`.
    pub cascade: String,
    pub eve: EveModel,
    pub vacuum_variance: f64,
    /// Replace the cascade model by the constant efficiency that yields this
    /// key rate.
    pub calibrate_to: Option<f64>,
    pub plan: FramePlan,
    pub pulses: usize,
    pub seed: u64,
    pub calibrate: bool,
    pub dump_session: bool,
    pub bin_width: Option<f64>,
    pub eta_grid: Vec<f64>,
    pub threshold_grid: Vec<f64>,
    pub alpha_search: AlphaSearch,
    pub out_dir: PathBuf,
}

/// `first/denom, (first+1)/denom, …`; dividing keeps the points short in
/// decimal.
fn grid(first: u32, last: u32, denom: f64) -> Vec<f64> {
    (first..=last).map(|k| k as f64 / denom).collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            channel: ChannelParams::lossless(),
            alpha: 0.8,
            threshold: None,
            cascade: "default".into(),
            eve: EveModel::Unconditioned,
            vacuum_variance: QuadratureConvention::QUARTER.vacuum_variance(),
            calibrate_to: None,
            plan: FramePlan::MODULATOR_1MHZ,
            pulses: 100_000,
            seed: 1,
            calibrate: true,
            dump_session: false,
            bin_width: None,
            eta_grid: grid(1, 19, 20.0),
            threshold_grid: grid(0, 40, 20.0),
            alpha_search: AlphaSearch::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Every key the file format understands, in application order.
pub const KEYS: &[&str] = &[
    "channel.eta_ch",
    "channel.eta_det",
    "channel.excess_noise",
    "channel.unbalance",
    "signal.alpha",
    "security.threshold",
    "security.cascade",
    "security.eve",
    "security.vacuum_variance",
    "security.calibrate_to",
    // before the durations, which may then override the derived gap
    "frame.pulse_rate",
    "frame.signal_duration",
    "frame.gap_duration",
    "frame.calibration_window",
    "montecarlo.pulses",
    "montecarlo.seed",
    "montecarlo.calibrate",
    "montecarlo.dump_session",
    "montecarlo.bin_width",
    "grids.eta",
    "grids.threshold",
    "grids.alpha_min",
    "grids.alpha_max",
    "grids.alpha_points",
    "output.dir",
];

fn as_f64(v: &Value) -> Result<f64, String> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(format!("expected a number, found {}", other.type_str())),
    }
}

fn as_count(v: &Value) -> Result<u64, String> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Integer(i) => Err(format!("expected a non-negative integer, found {i}")),
        other => Err(format!("expected an integer, found {}", other.type_str())),
    }
}

fn as_bool(v: &Value) -> Result<bool, String> {
    v.as_bool()
        .ok_or_else(|| format!("expected a boolean, found {}", v.type_str()))
}

fn as_str(v: &Value) -> Result<&str, String> {
    v.as_str()
        .ok_or_else(|| format!("expected a string, found {}", v.type_str()))
}

fn as_grid(v: &Value) -> Result<Vec<f64>, String> {
    let arr = v
        .as_array()
        .ok_or_else(|| format!("expected an array, found {}", v.type_str()))?;
    arr.iter().map(as_f64).collect()
}

/// A threshold or `"optimal"`.
fn as_threshold(v: &Value) -> Result<Option<f64>, String> {
    match v {
        Value::String(s) if s == "optimal" => Ok(None),
        other => as_f64(other).map(Some),
    }
}

pub fn parse_eve(s: &str) -> Result<EveModel, String> {
    match s {
        "unconditioned" => Ok(EveModel::Unconditioned),
        "posterior" => Ok(EveModel::PosteriorConditioned),
        other => Err(format!("unknown Eve model `{other}` (unconditioned|posterior)")),
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

impl RunConfig {
    /// Parameters of the rooftop key-exchange run at 100 kHz.
    pub fn paper() -> Self {
        Self {
            channel: ChannelParams::ROOFTOP,
            alpha: 0.8,
            vacuum_variance: QuadratureConvention::HALF.vacuum_variance(),
            plan: FramePlan::KEY_EXCHANGE_100KHZ,
            pulses: 1_000_000,
            ..Self::default()
        }
    }

    /// Sets one dotted key.
    pub fn apply(&mut self, key: &str, v: &Value) -> Result<(), String> {
        match key {
            "channel.eta_ch" => self.channel.eta_ch = as_f64(v)?,
            "channel.eta_det" => self.channel.eta_det = as_f64(v)?,
            "channel.excess_noise" => self.channel.excess_noise = as_f64(v)?,
            "channel.unbalance" => self.channel.unbalance = as_f64(v)?,
            "signal.alpha" => self.alpha = as_f64(v)?,
            "security.threshold" => self.threshold = as_threshold(v)?,
            "security.cascade" => self.cascade = as_str(v)?.to_string(),
            "security.eve" => self.eve = parse_eve(as_str(v)?)?,
            "security.vacuum_variance" => self.vacuum_variance = as_f64(v)?,
            "security.calibrate_to" => self.calibrate_to = Some(as_f64(v)?),
            "frame.pulse_rate" => {
                let rate = as_f64(v)?;
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(format!("pulse rate {rate} must be > 0"));
                }
                self.plan = self.plan.at_rate(rate);
            }
            "frame.signal_duration" => self.plan.signal_duration = as_f64(v)?,
            "frame.gap_duration" => self.plan.gap_duration = as_f64(v)?,
            "frame.calibration_window" => self.plan.calibration_window = as_count(v)? as usize,
            "montecarlo.pulses" => self.pulses = as_count(v)? as usize,
            "montecarlo.seed" => self.seed = as_count(v)?,
            "montecarlo.calibrate" => self.calibrate = as_bool(v)?,
            "montecarlo.dump_session" => self.dump_session = as_bool(v)?,
            "montecarlo.bin_width" => self.bin_width = Some(as_f64(v)?),
            "grids.eta" => self.eta_grid = as_grid(v)?,
            "grids.threshold" => self.threshold_grid = as_grid(v)?,
            "grids.alpha_min" => self.alpha_search.range.0 = as_f64(v)?,
            "grids.alpha_max" => self.alpha_search.range.1 = as_f64(v)?,
            "grids.alpha_points" => self.alpha_search.scan_points = as_count(v)? as usize,
            "output.dir" => self.out_dir = PathBuf::from(as_str(v)?),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Applies a TOML document on top of `self`, reporting every bad key.
    pub fn merge_toml(&mut self, text: &str) -> CliResult<()> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(vec![e.to_string()]))?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        let mut bad = Vec::new();
        for (key, _) in &entries {
            if !KEYS.contains(&key.as_str()) {
                bad.push(format!("{key}: unknown key"));
            }
        }
        for key in KEYS {
            if let Some((_, v)) = entries.iter().find(|(k, _)| k == key) {
                if let Err(reason) = self.apply(key, v) {
                    bad.push(format!("{key}: {reason}"));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(bad))
        }
    }

    pub fn merge_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.merge_toml(&text)
    }

    pub fn convention(&self) -> Result<QuadratureConvention, String> {
        QuadratureConvention::new(self.vacuum_variance).map_err(|e| e.to_string())
    }

    pub fn cascade_model(&self) -> Result<CascadeModel, String> {
        let spec = self.cascade.trim();
        let model = if spec == "default" {
            CascadeModel::default_table()
        } else if spec == "ideal" {
            CascadeModel::Ideal
        } else if let Some(f) = spec.strip_prefix("constant:") {
            let f = f
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("constant efficiency `{f}`: {e}"))?;
            CascadeModel::Constant(f)
        } else if let Some(path) = spec.strip_prefix("table:") {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cascade table {path}: {e}"))?;
            CascadeModel::parse_table(&text).map_err(|e| format!("cascade table {path}: {e}"))?
        } else {
            return Err(format!(
                "`{spec}` is not one of default, ideal, constant:<f>, table:<path>"
            ));
        };
        model.validate().map_err(|e| e.to_string())?;
        Ok(model)
    }

    /// Every problem with the configuration, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let mut tag = |section: &str, list: Vec<String>| {
            bad.extend(list.into_iter().map(|p| format!("{section}: {p}")));
        };
        tag("channel", self.channel.problems());
        tag("frame", self.plan.problems());
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            tag("signal.alpha", vec![format!("{} must be finite and >= 0", self.alpha)]);
        }
        if let Some(t) = self.threshold {
            if !(t >= 0.0 && t.is_finite()) {
                tag("security.threshold", vec![format!("{t} must be finite and >= 0")]);
            }
        }
        if let Err(e) = self.cascade_model() {
            tag("security.cascade", vec![e]);
        }
        if let Err(e) = self.convention() {
            tag("security.vacuum_variance", vec![e]);
        }
        if let Some(g) = self.calibrate_to {
            if !(g > 0.0 && g < 1.0) {
                tag("security.calibrate_to", vec![format!("{g} must lie in (0, 1)")]);
            }
        }
        if self.seed > i64::MAX as u64 {
            tag("montecarlo.seed", vec![format!("{} exceeds {}", self.seed, i64::MAX)]);
        }
        if self.pulses == 0 {
            tag("montecarlo.pulses", vec!["must be > 0".into()]);
        }
        if let Some(w) = self.bin_width {
            if !(w > 0.0 && w.is_finite()) {
                tag("montecarlo.bin_width", vec![format!("{w} must be > 0")]);
            }
        }
        let increasing = |g: &[f64]| !g.is_empty() && g.windows(2).all(|p| p[1] > p[0]);
        if !increasing(&self.eta_grid) || self.eta_grid.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            tag("grids.eta", vec!["must be non-empty, strictly increasing and within (0, 1]".into()]);
        }
        if !increasing(&self.threshold_grid) || self.threshold_grid.iter().any(|&t| !(t >= 0.0)) {
            tag("grids.threshold", vec!["must be non-empty, strictly increasing and >= 0".into()]);
        }
        if let Err(cvqkd_core::Error::Validation(list)) = self.alpha_search.validate() {
            tag("grids", list);
        }
        if self.out_dir.as_os_str().is_empty() {
            tag("output.dir", vec!["must not be empty".into()]);
        }
        bad
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = self.problems();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(bad))
        }
    }

    /// Analytic context for the configured link; the threshold is left at 0.
    pub fn security_context(&self) -> CliResult<SecurityContext> {
        self.validate()?;
        let cascade = self.cascade_model().map_err(|e| CliError::Config(vec![e]))?;
        let convention = self.convention().map_err(|e| CliError::Config(vec![e]))?;
        let ctx = SecurityContext::new(self.alpha, self.channel.overall_transmittance()?)
            .with_cascade(cascade)
            .with_eve(self.eve)
            .with_convention(convention)
            .with_excess_noise(self.channel.total_excess_noise()?);
        Ok(ctx)
    }

    pub fn quadrature(&self) -> QuadratureSettings {
        QuadratureSettings::default()
    }

    /// The configuration as a TOML document that [`merge_toml`] reads back
    /// to an identical value. The output directory is left out so that runs
    /// differing only in where they write produce identical files.
    ///
    /// [`merge_toml`]: RunConfig::merge_toml
    pub fn to_toml(&self) -> String {
        let num = |x: f64| format!("{x:?}");
        let list = |g: &[f64]| {
            let items: Vec<String> = g.iter().map(|x| format!("{x:?}")).collect();
            format!("[{}]", items.join(", "))
        };
        let string = |s: &str| Value::String(s.to_string()).to_string();
        let lines: Vec<(&str, String)> = vec![
            ("channel.eta_ch", num(self.channel.eta_ch)),
            ("channel.eta_det", num(self.channel.eta_det)),
            ("channel.excess_noise", num(self.channel.excess_noise)),
            ("channel.unbalance", num(self.channel.unbalance)),
            ("signal.alpha", num(self.alpha)),
            (
                "security.threshold",
                self.threshold.map(num).unwrap_or_else(|| string("optimal")),
            ),
            ("security.cascade", string(&self.cascade)),
            ("security.eve", string(self.eve.as_str())),
            ("security.vacuum_variance", num(self.vacuum_variance)),
            ("security.calibrate_to", self.calibrate_to.map(num).unwrap_or_default()),
            ("frame.pulse_rate", num(self.plan.pulse_rate)),
            ("frame.signal_duration", num(self.plan.signal_duration)),
            ("frame.gap_duration", num(self.plan.gap_duration)),
            ("frame.calibration_window", self.plan.calibration_window.to_string()),
            ("montecarlo.pulses", self.pulses.to_string()),
            ("montecarlo.seed", self.seed.to_string()),
            ("montecarlo.calibrate", self.calibrate.to_string()),
            ("montecarlo.dump_session", self.dump_session.to_string()),
            ("montecarlo.bin_width", self.bin_width.map(num).unwrap_or_default()),
            ("grids.eta", list(&self.eta_grid)),
            ("grids.threshold", list(&self.threshold_grid)),
            ("grids.alpha_min", num(self.alpha_search.range.0)),
            ("grids.alpha_max", num(self.alpha_search.range.1)),
            ("grids.alpha_points", self.alpha_search.scan_points.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in lines {
            // absent optional values are simply left out
            if !v.is_empty() {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_and_preset_are_valid() {
        assert!(RunConfig::default().problems().is_empty());
        assert!(RunConfig::paper().problems().is_empty());
    }

    #[test]
    fn echo_reads_back_identically() {
        for cfg in [RunConfig::default(), RunConfig::paper()] {
            let mut back = RunConfig { out_dir: cfg.out_dir.clone(), ..RunConfig::default() };
            back.merge_toml(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn sections_and_dotted_keys_are_equivalent() {
        let mut a = RunConfig::default();
        a.merge_toml("channel.eta_ch = 0.5\nsignal.alpha = 1.1\n").unwrap();
        let mut b = RunConfig::default();
        b.merge_toml("[channel]\neta_ch = 0.5\n[signal]\nalpha = 1.1\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.channel.eta_ch, 0.5);
    }

    #[test]
    fn every_bad_key_is_reported() {
        let mut cfg = RunConfig::default();
        let err = cfg
            .merge_toml("channel.eta_ch = \"high\"\nsignal.alpah = 1\nmontecarlo.seed = -4\n")
            .unwrap_err();
        let CliError::Config(list) = err else { panic!("{err:?}") };
        assert_eq!(list.len(), 3, "{list:?}");
    }

    #[test]
    fn every_bad_value_is_reported() {
        let cfg = RunConfig {
            alpha: -1.0,
            channel: ChannelParams { eta_det: 1.5, ..ChannelParams::lossless() },
            cascade: "constant:abc".into(),
            eta_grid: vec![],
            ..RunConfig::default()
        };
        let bad = cfg.problems();
        for field in ["signal.alpha", "eta_det", "security.cascade", "grids.eta"] {
            assert!(bad.iter().any(|p| p.contains(field)), "{field} missing from {bad:?}");
        }
    }

    #[test]
    fn pulse_rate_rederives_the_gap() {
        let mut cfg = RunConfig::default();
        cfg.merge_toml("frame.pulse_rate = 100000").unwrap();
        assert!(cfg.problems().is_empty());
        assert!((cfg.plan.gap_duration - 9.6e-6).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn echo_round_trips(
            alpha in 0.0f64..3.0,
            eta in 0.01f64..1.0,
            threshold in proptest::option::of(0.0f64..3.0),
            seed in any::<u32>(),
            pulses in 1usize..10_000_000,
        ) {
            let cfg = RunConfig {
                alpha,
                threshold,
                seed: seed as u64,
                pulses,
                channel: ChannelParams::with_transmittance(eta),
                ..RunConfig::paper()
            };
            let mut back = RunConfig::default();
            back.merge_toml(&cfg.to_toml()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
