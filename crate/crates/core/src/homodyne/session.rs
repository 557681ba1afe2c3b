use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{sample_outcome, Drift, FramePlan, PulseRecord};
use crate::channel::{attenuate_amplitude, ChannelParams};
use crate::error::{ensure_domain, Result};
use crate::qstate::QuadratureConvention;

/// Slots generated from one generator sub-stream.
const SLOTS_PER_STREAM: usize = 1 << 15;

/// Everything needed to reproduce a simulated session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    pub n_signals: usize,
    /// Amplitude Alice prepares before the channel.
    pub alpha: f64,
    pub channel: ChannelParams,
    pub plan: FramePlan,
    pub convention: QuadratureConvention,
    pub drift: Drift,
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(n_signals: usize, alpha: f64, channel: ChannelParams, seed: u64) -> Self {
        Self {
            n_signals,
            alpha,
            channel,
            plan: FramePlan::default(),
            convention: QuadratureConvention::default(),
            drift: Drift::None,
            seed,
        }
    }
}

/// Generates interleaved signal/vacuum records.
///
/// Signal outcomes have mean `±√η α` and carry the channel's total excess
/// noise; vacuum outcomes are shot-noise limited with mean zero. The drift
/// is added to every raw value. Slots are split into fixed-size blocks, each
/// drawn from its own ChaCha sub-stream, so the output depends only on the
/// seed and never on the thread count.
pub fn generate_session(config: &SessionConfig) -> Result<Vec<PulseRecord>> {
    ensure_domain(
        config.n_signals >= 1,
        "n_signals",
        config.n_signals as f64,
        "at least one signal is required",
    )?;
    config.plan.validate()?;
    let eta = config.channel.overall_transmittance()?;
    let mean = attenuate_amplitude(config.alpha, eta)?;
    let excess = config.channel.total_excess_noise()?;

    let mut records = vec![PulseRecord::vacuum(0, 0.0); 2 * config.n_signals];
    records
        .par_chunks_mut(2 * SLOTS_PER_STREAM)
        .enumerate()
        .try_for_each(|(stream, block)| -> Result<()> {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stream as u64);
            let first_slot = stream * SLOTS_PER_STREAM;
            for (k, pair) in block.chunks_exact_mut(2).enumerate() {
                let slot = (first_slot + k) as u64;
                let bit: bool = rng.random();
                let signed = if bit { mean } else { -mean };
                let s_idx = 2 * slot;
                let v_idx = 2 * slot + 1;
                let s = sample_outcome(signed, excess, config.convention, &mut rng)?;
                let v = sample_outcome(0.0, 0.0, config.convention, &mut rng)?;
                pair[0] = PulseRecord::signal(s_idx, bit, s + config.drift.at(s_idx));
                pair[1] = PulseRecord::vacuum(v_idx, v + config.drift.at(v_idx));
            }
            Ok(())
        })?;
    Ok(records)
}

/// Splits a session into (signal, vacuum) records, preserving order.
pub fn split_records(records: &[PulseRecord]) -> (Vec<PulseRecord>, Vec<PulseRecord>) {
    records.iter().partition(|r| r.is_signal())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::calibrate;

    fn config(n: usize, alpha: f64, eta: f64, seed: u64) -> SessionConfig {
        SessionConfig::new(n, alpha, ChannelParams::with_transmittance(eta), seed)
    }

    #[test]
    fn records_interleave() {
        let recs = generate_session(&config(10, 0.8, 0.64, 1)).unwrap();
        assert_eq!(recs.len(), 20);
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(r.index, i as u64);
            assert_eq!(r.is_signal(), i % 2 == 0);
            assert_eq!(r.alice_bit.is_some(), r.is_signal());
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = config(100_000, 0.8, 0.64, 42);
        let a = generate_session(&cfg).unwrap();
        let b = generate_session(&cfg).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.raw.to_bits() == y.raw.to_bits()
            && x.alice_bit == y.alice_bit));
        let c = generate_session(&SessionConfig { seed: 43, ..cfg }).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x.raw != y.raw));
    }

    #[test]
    fn attenuated_mean_magnitude() {
        let n = 100_000;
        let recs = generate_session(&config(n, 0.80, 0.64, 3)).unwrap();
        let folded: f64 = recs
            .iter()
            .filter(|r| r.is_signal())
            .map(|r| if r.alice_bit == Some(true) { r.raw } else { -r.raw })
            .sum::<f64>()
            / n as f64;
        let sigma = 0.5 / (n as f64).sqrt();
        assert!((folded - 0.64).abs() < 3.0 * sigma, "mean {folded}");
    }

    #[test]
    fn zero_modulation_matches_vacuum() {
        // Welch two-sample test on the means and an F-style check on the variances
        let recs = generate_session(&config(10_000, 0.0, 0.64, 5)).unwrap();
        let (sig, vac) = split_records(&recs);
        let stats = |xs: &[PulseRecord]| {
            let n = xs.len() as f64;
            let m = xs.iter().map(|r| r.raw).sum::<f64>() / n;
            let v = xs.iter().map(|r| (r.raw - m).powi(2)).sum::<f64>() / (n - 1.0);
            (m, v, n)
        };
        let (ms, vs, ns) = stats(&sig);
        let (mv, vv, nv) = stats(&vac);
        let z = (ms - mv) / (vs / ns + vv / nv).sqrt();
        // |z| < 2.576 is p > 0.01 two-sided
        assert!(z.abs() < 2.576, "z = {z}");
        assert!((vs / vv - 1.0).abs() < 0.05);
    }

    #[test]
    fn constant_drift_removed_by_calibration() {
        let base = config(5_000, 0.8, 0.64, 9);
        let drifted = SessionConfig { drift: Drift::Constant(0.3), ..base };
        let a = calibrate(&generate_session(&base).unwrap(), 100).unwrap();
        let b = calibrate(&generate_session(&drifted).unwrap(), 100).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.calibrated.unwrap() - y.calibrated.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(generate_session(&config(0, 0.8, 0.64, 1)).is_err());
        assert!(generate_session(&config(10, -0.8, 0.64, 1)).is_err());
        let mut bad = config(10, 0.8, 0.64, 1);
        bad.plan.calibration_window = 0;
        assert!(generate_session(&bad).is_err());
    }
}
