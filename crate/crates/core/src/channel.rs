//! Free-space channel: loss composition, excess noise and detector unbalance.

use crate::error::{ensure_domain, Error, Result};

/// Largest unbalance accepted by [`unbalance_excess_noise`].
pub const MAX_UNBALANCE_MODEL: f64 = 0.05;
/// Largest unbalance accepted in a [`ChannelParams`] bundle.
pub const MAX_UNBALANCE: f64 = 0.02;

/// Static description of the link between Alice and Bob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Channel transmittance, in (0, 1].
    pub eta_ch: f64,
    /// Detection efficiency, in (0, 1].
    pub eta_det: f64,
    /// Excess noise of the signal in shot-noise units.
    pub excess_noise: f64,
    /// Fractional homodyne unbalance, in [0, 0.02].
    pub unbalance: f64,
}

impl ChannelParams {
    /// 100 m rooftop link: retro-reflector-limited channel and 17 % detection loss.
    pub const ROOFTOP: Self = Self {
        eta_ch: 0.77,
        eta_det: 0.83,
        excess_noise: 0.0,
        unbalance: 0.0,
    };

    pub fn lossless() -> Self {
        Self {
            eta_ch: 1.0,
            eta_det: 1.0,
            excess_noise: 0.0,
            unbalance: 0.0,
        }
    }

    pub fn with_transmittance(eta: f64) -> Self {
        Self {
            eta_ch: eta,
            ..Self::lossless()
        }
    }

    /// Collects every out-of-range field rather than stopping at the first.
    pub fn problems(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if !(self.eta_ch > 0.0 && self.eta_ch <= 1.0) {
            bad.push(format!("eta_ch = {} must lie in (0, 1]", self.eta_ch));
        }
        if !(self.eta_det > 0.0 && self.eta_det <= 1.0) {
            bad.push(format!("eta_det = {} must lie in (0, 1]", self.eta_det));
        }
        if !(self.excess_noise >= 0.0 && self.excess_noise.is_finite()) {
            bad.push(format!("excess_noise = {} must be >= 0", self.excess_noise));
        }
        if !(0.0..=MAX_UNBALANCE).contains(&self.unbalance) {
            bad.push(format!(
                "unbalance = {} must lie in [0, {MAX_UNBALANCE}]",
                self.unbalance
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

    /// `η = η_ch · η_det`.
    pub fn overall_transmittance(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.eta_ch * self.eta_det)
    }

    /// Excess noise including the unbalance contribution.
    pub fn total_excess_noise(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.excess_noise + unbalance_excess_noise(self.unbalance)?)
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::ROOFTOP
    }
}

pub fn overall_transmittance(params: &ChannelParams) -> Result<f64> {
    params.overall_transmittance()
}

/// Amplitude surviving a channel of transmittance `eta`: `√η · α`.
pub fn attenuate_amplitude(alpha: f64, eta: f64) -> Result<f64> {
    ensure_domain(alpha >= 0.0, "alpha", alpha, "amplitude must be non-negative")?;
    ensure_domain(eta > 0.0 && eta <= 1.0, "eta", eta, "transmittance must lie in (0, 1]")?;
    Ok(eta.sqrt() * alpha)
}

/// Excess noise (shot-noise units) attributed to a homodyne unbalance `u`.
///
/// Linear upper bound: an unbalance `u` of a shot-noise-limited local
/// oscillator contributes at most `u` shot-noise units.
pub fn unbalance_excess_noise(u: f64) -> Result<f64> {
    ensure_domain(
        (0.0..=MAX_UNBALANCE_MODEL).contains(&u),
        "unbalance",
        u,
        "must lie in [0, 0.05]",
    )?;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rooftop_transmittance() {
        let eta = ChannelParams::ROOFTOP.overall_transmittance().unwrap();
        assert!((eta - 0.6391).abs() < 1e-12);
        assert!((eta - 0.64).abs() < 0.005);
    }

    #[test]
    fn transmittance_examples() {
        let p = |a, b| ChannelParams { eta_ch: a, eta_det: b, ..ChannelParams::lossless() };
        assert_eq!(p(1.0, 1.0).overall_transmittance().unwrap(), 1.0);
        assert_eq!(p(0.5, 0.5).overall_transmittance().unwrap(), 0.25);
        assert!(p(0.0, 0.5).overall_transmittance().is_err());
        assert!(p(0.5, 1.2).overall_transmittance().is_err());
    }

    #[test]
    fn validation_lists_every_problem() {
        let p = ChannelParams {
            eta_ch: 1.5,
            eta_det: 0.0,
            excess_noise: -1.0,
            unbalance: 0.5,
        };
        match p.validate() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn attenuation_examples() {
        assert!((attenuate_amplitude(0.80, 0.64).unwrap() - 0.64).abs() < 1e-15);
        assert_eq!(attenuate_amplitude(0.8, 1.0).unwrap(), 0.8);
        assert_eq!(attenuate_amplitude(0.0, 0.3).unwrap(), 0.0);
        assert!(attenuate_amplitude(0.8, 0.0).is_err());
        assert!(attenuate_amplitude(-0.1, 0.5).is_err());
    }

    #[test]
    fn unbalance_examples() {
        assert_eq!(unbalance_excess_noise(0.0).unwrap(), 0.0);
        assert_eq!(unbalance_excess_noise(0.01).unwrap(), 0.01);
        assert_eq!(unbalance_excess_noise(0.02).unwrap(), 0.02);
        assert!(unbalance_excess_noise(0.06).is_err());
        assert!(unbalance_excess_noise(-0.01).is_err());
    }

    #[test]
    fn total_noise_adds_unbalance() {
        let p = ChannelParams { excess_noise: 0.03, unbalance: 0.01, ..ChannelParams::ROOFTOP };
        assert!((p.total_excess_noise().unwrap() - 0.04).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn loss_composes(alpha in 0.0f64..5.0, e1 in 1e-3f64..=1.0, e2 in 1e-3f64..=1.0) {
            let twice = attenuate_amplitude(attenuate_amplitude(alpha, e1).unwrap(), e2).unwrap();
            let once = attenuate_amplitude(alpha, e1 * e2).unwrap();
            prop_assert!((twice - once).abs() <= 1e-12);
        }

        #[test]
        fn transmittance_commutes_and_is_monotone(a in 1e-3f64..=1.0, b in 1e-3f64..=1.0, d in 0.0f64..0.5) {
            let p = |x, y| ChannelParams { eta_ch: x, eta_det: y, ..ChannelParams::lossless() };
            prop_assert_eq!(p(a, b).overall_transmittance().unwrap(), p(b, a).overall_transmittance().unwrap());
            let a2 = (a + d).min(1.0);
            prop_assert!(p(a2, b).overall_transmittance().unwrap() >= p(a, b).overall_transmittance().unwrap());
        }
    }
}
