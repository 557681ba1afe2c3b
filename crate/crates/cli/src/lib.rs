//! Command-line driver: configuration layering, subcommands and output files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use toml::Value;

use crate::config::{RunConfig, KEYS};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "cvqkd", version, about = "BPSK continuous-variable QKD over a lossy free-space link")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Postselected key rate, optimal threshold and throughput.
    Keyrate(Overrides),
    /// Optimal amplitude, error-rate and key-rate curves as CSV.
    Curves(Overrides),
    /// Monte Carlo session compared against the analytic rates.
    Simulate(Overrides),
    /// Excess-noise estimate from a simulated or recorded session.
    Noise {
        #[command(flatten)]
        overrides: Overrides,
        /// Session CSV to analyse instead of simulating one.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Amplitude that maximizes the key rate.
    OptimizeAlpha(Overrides),
    /// Threshold that maximizes the key rate.
    OptimizeThreshold(Overrides),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Keyrate(_) => "keyrate",
            Command::Curves(_) => "curves",
            Command::Simulate(_) => "simulate",
            Command::Noise { .. } => "noise",
            Command::OptimizeAlpha(_) => "optimize-alpha",
            Command::OptimizeThreshold(_) => "optimize-threshold",
        }
    }

    fn overrides(&self) -> &Overrides {
        match self {
            Command::Keyrate(o)
            | Command::Curves(o)
            | Command::Simulate(o)
            | Command::OptimizeAlpha(o)
            | Command::OptimizeThreshold(o) => o,
            Command::Noise { overrides, .. } => overrides,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Rooftop link at 100 kHz with the published amplitude.
    Paper,
}

/// Flags shared by every subcommand. They override the configuration file,
/// which overrides the preset.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML file with dotted keys such as `channel.eta_ch = 0.77`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta_ch: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta_det: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Fixed postselection threshold; the optimum is used when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub excess_noise: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub unbalance: Option<f64>,
    #[arg(long)]
    pub pulses: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub pulse_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// default, ideal, constant:<f> or table:<path>.
    #[arg(long)]
    pub cascade: Option<String>,
    /// unconditioned or posterior.
    #[arg(long)]
    pub eve: Option<String>,
    /// Vacuum quadrature variance: 0.25 or 0.5 for the usual conventions.
    #[arg(long, allow_negative_numbers = true)]
    pub vacuum_variance: Option<f64>,
    /// Calibrate a constant reconciliation efficiency to this key rate.
    #[arg(long, allow_negative_numbers = true)]
    pub calibrate_to: Option<f64>,
    /// Postselect raw outcomes instead of vacuum-calibrated ones.
    #[arg(long)]
    pub no_calibrate: bool,
    /// Also write the full session as session.csv.
    #[arg(long)]
    pub dump_session: bool,
    #[arg(long, allow_negative_numbers = true)]
    pub bin_width: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    fn entries(&self, bad: &mut Vec<String>) -> Vec<(&'static str, Value)> {
        let mut v: Vec<(&'static str, Value)> = Vec::new();
        let mut float = |k: &'static str, x: Option<f64>| {
            if let Some(x) = x {
                v.push((k, Value::Float(x)));
            }
        };
        float("channel.eta_ch", self.eta_ch);
        float("channel.eta_det", self.eta_det);
        float("signal.alpha", self.alpha);
        float("security.threshold", self.threshold);
        float("channel.excess_noise", self.excess_noise);
        float("channel.unbalance", self.unbalance);
        float("frame.pulse_rate", self.pulse_rate);
        float("security.vacuum_variance", self.vacuum_variance);
        float("security.calibrate_to", self.calibrate_to);
        float("montecarlo.bin_width", self.bin_width);
        for (key, x) in [("montecarlo.pulses", self.pulses), ("montecarlo.seed", self.seed)] {
            match x.map(i64::try_from) {
                Some(Ok(i)) => v.push((key, Value::Integer(i))),
                Some(Err(_)) => bad.push(format!("--{}: exceeds {}", flag_name(key), i64::MAX)),
                None => {}
            }
        }
        if let Some(c) = &self.cascade {
            v.push(("security.cascade", Value::String(c.clone())));
        }
        if let Some(e) = &self.eve {
            v.push(("security.eve", Value::String(e.clone())));
        }
        if self.no_calibrate {
            v.push(("montecarlo.calibrate", Value::Boolean(false)));
        }
        if self.dump_session {
            v.push(("montecarlo.dump_session", Value::Boolean(true)));
        }
        if let Some(o) = &self.out {
            v.push(("output.dir", Value::String(o.to_string_lossy().into_owned())));
        }
        v
    }

    /// Preset, then file, then flags; every problem is reported at once.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match self.preset {
            Some(Preset::Paper) => RunConfig::paper(),
            None => RunConfig::default(),
        };
        let mut bad = Vec::new();
        if let Some(path) = &self.config {
            match cfg.merge_file(path) {
                Ok(()) => {}
                Err(CliError::Config(list)) => bad.extend(list),
                Err(e) => return Err(e),
            }
        }
        let entries = self.entries(&mut bad);
        for key in KEYS {
            if let Some((k, v)) = entries.iter().find(|(k, _)| k == key) {
                if let Err(reason) = cfg.apply(k, v) {
                    bad.push(format!("--{}: {reason}", flag_name(k)));
                }
            }
        }
        bad.extend(cfg.problems());
        if bad.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Config(bad))
        }
    }
}

fn flag_name(key: &str) -> String {
    key.rsplit('.').next().unwrap_or(key).replace('_', "-")
}

/// Runs a parsed command line; returns the summary line to print.
pub fn run(cli: &Cli) -> CliResult<String> {
    let cfg = cli.command.overrides().resolve()?;
    let outcome = match &cli.command {
        Command::Keyrate(_) => commands::keyrate(&cfg)?,
        Command::Curves(_) => commands::curves(&cfg)?,
        Command::Simulate(_) => commands::simulate(&cfg)?,
        Command::Noise { input, .. } => commands::noise(&cfg, input.as_ref())?,
        Command::OptimizeAlpha(_) => commands::optimize_alpha(&cfg)?,
        Command::OptimizeThreshold(_) => commands::optimize_threshold(&cfg)?,
    };
    let written = output::write_run(&cfg, cli.command.name(), &outcome.artifacts)?;
    let mut msg = outcome.summary;
    for p in written {
        msg.push_str(&format!("\n  wrote {}", p.display()));
    }
    Ok(msg)
}
