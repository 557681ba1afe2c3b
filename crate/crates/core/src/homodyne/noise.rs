use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::PulseRecord;
use crate::error::{Error, Result};

/// Minimum number of records of each kind the estimator accepts.
pub const MIN_RECORDS: usize = 1_000;

/// Excess-noise estimate for one modulation sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedNoise {
    pub epsilon: f64,
    pub confidence_interval: (f64, f64),
    pub count: usize,
    /// Mean calibrated outcome of this sign.
    pub mean: f64,
}

/// Signal variance relative to the calibrated vacuum, minus one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEstimate {
    /// Pooled over both modulation signs.
    pub epsilon: f64,
    /// 95 % interval from the F distribution of the variance ratio.
    pub confidence_interval: (f64, f64),
    pub positive: SignedNoise,
    pub negative: SignedNoise,
    pub signal_variance: f64,
    pub vacuum_variance: f64,
    pub n_signal: usize,
    pub n_vacuum: usize,
}

impl NoiseEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.confidence_interval.1 - self.confidence_interval.0)
    }

    pub fn covers(&self, epsilon: f64) -> bool {
        self.confidence_interval.0 <= epsilon && epsilon <= self.confidence_interval.1
    }
}

struct Moments {
    n: usize,
    mean: f64,
    ss: f64,
}

fn moments(values: impl Iterator<Item = f64>) -> Moments {
    // Welford
    let (mut n, mut mean, mut ss) = (0usize, 0.0, 0.0);
    for x in values {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        ss += d * (x - mean);
    }
    Moments { n, mean, ss }
}

fn ratio_interval(ratio: f64, dof_num: f64, dof_den: f64) -> Result<(f64, f64)> {
    let f = FisherSnedecor::new(dof_num, dof_den)
        .map_err(|e| Error::NonConvergence(format!("F distribution: {e}")))?;
    let upper_q = f.inverse_cdf(0.975);
    let lower_q = f.inverse_cdf(0.025);
    Ok((ratio / upper_q - 1.0, ratio / lower_q - 1.0))
}

/// Estimates excess noise from calibrated records.
///
/// Signal variance is taken about each sign's own mean, so the modulation
/// does not count as noise. Records without a calibrated value are an error.
pub fn estimate_excess_noise(records: &[PulseRecord]) -> Result<NoiseEstimate> {
    let calibrated = |r: &PulseRecord| {
        r.calibrated.ok_or_else(|| {
            Error::Validation(vec![format!("record {} has not been calibrated", r.index)])
        })
    };
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut vac = Vec::new();
    for r in records {
        let v = calibrated(r)?;
        match r.alice_bit {
            Some(true) => plus.push(v),
            Some(false) => minus.push(v),
            None => vac.push(v),
        }
    }
    let n_signal = plus.len() + minus.len();
    if n_signal < MIN_RECORDS || vac.len() < MIN_RECORDS {
        return Err(Error::InsufficientData(format!(
            "excess-noise estimation needs at least {MIN_RECORDS} signal and vacuum records \
             (got {n_signal} and {})",
            vac.len()
        )));
    }
    if plus.len() < 2 || minus.len() < 2 {
        return Err(Error::InsufficientData(
            "both modulation signs need at least two records".into(),
        ));
    }

    let mp = moments(plus.iter().copied());
    let mm = moments(minus.iter().copied());
    let mv = moments(vac.iter().copied());
    let vacuum_variance = mv.ss / (mv.n - 1) as f64;
    if !(vacuum_variance > 0.0) {
        return Err(Error::InsufficientData(
            "vacuum records have zero variance".into(),
        ));
    }
    let pooled_dof = (mp.n + mm.n - 2) as f64;
    let signal_variance = (mp.ss + mm.ss) / pooled_dof;
    if !(signal_variance > 0.0) {
        return Err(Error::InsufficientData(
            "signal records have zero variance".into(),
        ));
    }
    let vac_dof = (mv.n - 1) as f64;

    let ratio = signal_variance / vacuum_variance;
    let signed = |m: &Moments| -> Result<SignedNoise> {
        let dof = (m.n - 1) as f64;
        let r = m.ss / dof / vacuum_variance;
        Ok(SignedNoise {
            epsilon: r - 1.0,
            confidence_interval: ratio_interval(r, dof, vac_dof)?,
            count: m.n,
            mean: m.mean,
        })
    };

    Ok(NoiseEstimate {
        epsilon: ratio - 1.0,
        confidence_interval: ratio_interval(ratio, pooled_dof, vac_dof)?,
        positive: signed(&mp)?,
        negative: signed(&mm)?,
        signal_variance,
        vacuum_variance,
        n_signal,
        n_vacuum: mv.n,
    })
}
