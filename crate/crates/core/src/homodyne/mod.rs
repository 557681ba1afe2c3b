//! Simulated homodyne measurement: pulse framing, Gaussian outcome
//! generation, vacuum calibration and excess-noise estimation.
//!
//! Every time slot carries one signal pulse followed by one vacuum gap, so a
//! session of `n` signals holds `2n` records with indices `2k` (signal) and
//! `2k + 1` (vacuum).

mod calibration;
mod csv;
mod noise;
mod session;

pub use calibration::calibrate;
pub use csv::{read_session_csv, write_session_csv, SESSION_CSV_HEADER};
pub use noise::{estimate_excess_noise, NoiseEstimate, SignedNoise};
pub use session::{generate_session, split_records, SessionConfig};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_domain, Error, Result};
use crate::qstate::QuadratureConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseKind {
    Signal,
    Vacuum,
}

impl PulseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PulseKind::Signal => "signal",
            PulseKind::Vacuum => "vacuum",
        }
    }
}

/// One measured time slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRecord {
    pub index: u64,
    pub kind: PulseKind,
    /// Alice's bit (`true` for `|+α⟩`); present only on signal records.
    pub alice_bit: Option<bool>,
    pub raw: f64,
    pub calibrated: Option<f64>,
}

impl PulseRecord {
    pub fn signal(index: u64, bit: bool, raw: f64) -> Self {
        Self {
            index,
            kind: PulseKind::Signal,
            alice_bit: Some(bit),
            raw,
            calibrated: None,
        }
    }

    pub fn vacuum(index: u64, raw: f64) -> Self {
        Self {
            index,
            kind: PulseKind::Vacuum,
            alice_bit: None,
            raw,
            calibrated: None,
        }
    }

    pub fn is_signal(&self) -> bool {
        self.kind == PulseKind::Signal
    }
}

/// Timing of the modulation pattern and the calibration window size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePlan {
    /// Seconds the modulator holds the signal voltage.
    pub signal_duration: f64,
    /// Seconds at zero modulation (vacuum) after each signal.
    pub gap_duration: f64,
    /// Slots per second.
    pub pulse_rate: f64,
    /// Number of vacuum records averaged to calibrate each outcome.
    pub calibration_window: usize,
}

impl FramePlan {
    /// Modulator characterization pattern: 400 ns signal, 600 ns vacuum at 1 MHz.
    pub const MODULATOR_1MHZ: Self = Self {
        signal_duration: 400e-9,
        gap_duration: 600e-9,
        pulse_rate: 1e6,
        calibration_window: 100,
    };

    /// Key-exchange pattern at 100 kHz; the 400 ns signal is followed by a
    /// longer vacuum gap.
    pub const KEY_EXCHANGE_100KHZ: Self = Self {
        signal_duration: 400e-9,
        gap_duration: 9.6e-6,
        pulse_rate: 1e5,
        calibration_window: 100,
    };

    pub fn problems(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if !(self.signal_duration > 0.0) {
            bad.push(format!("signal_duration = {} must be > 0", self.signal_duration));
        }
        if !(self.gap_duration > 0.0) {
            bad.push(format!("gap_duration = {} must be > 0", self.gap_duration));
        }
        if !(self.pulse_rate > 0.0 && self.pulse_rate.is_finite()) {
            bad.push(format!("pulse_rate = {} must be > 0", self.pulse_rate));
        } else {
            let period = 1.0 / self.pulse_rate;
            let slot = self.signal_duration + self.gap_duration;
            if (slot - period).abs() > 1e-9 * period {
                bad.push(format!(
                    "signal_duration + gap_duration = {slot} s must equal the pulse period {period} s"
                ));
            }
        }
        if self.calibration_window < 2 {
            bad.push(format!(
                "calibration_window = {} must be >= 2",
                self.calibration_window
            ));
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

    /// Same timing at another pulse rate, keeping the signal duration.
    pub fn at_rate(&self, pulse_rate: f64) -> Self {
        Self {
            gap_duration: 1.0 / pulse_rate - self.signal_duration,
            pulse_rate,
            ..*self
        }
    }
}

impl Default for FramePlan {
    fn default() -> Self {
        Self::MODULATOR_1MHZ
    }
}

/// Slow offset added to every raw outcome, as a function of record index.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Drift {
    #[default]
    None,
    Constant(f64),
    /// Offset grows by `per_record` with each record index.
    Linear { per_record: f64 },
    Sinusoidal { amplitude: f64, period_records: f64 },
}

impl Drift {
    pub fn at(&self, index: u64) -> f64 {
        match *self {
            Drift::None => 0.0,
            Drift::Constant(d) => d,
            Drift::Linear { per_record } => per_record * index as f64,
            Drift::Sinusoidal {
                amplitude,
                period_records,
            } => amplitude * (std::f64::consts::TAU * index as f64 / period_records).sin(),
        }
    }
}

/// One Gaussian homodyne outcome with the given mean and variance
/// `vacuum_variance · (1 + excess_noise)`.
pub fn sample_outcome<R: Rng + ?Sized>(
    mean: f64,
    excess_noise: f64,
    convention: QuadratureConvention,
    rng: &mut R,
) -> Result<f64> {
    ensure_domain(
        excess_noise >= 0.0,
        "excess_noise",
        excess_noise,
        "must be non-negative",
    )?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + convention.outcome_std(excess_noise) * z)
}
