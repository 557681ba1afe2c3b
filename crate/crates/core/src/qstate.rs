//! Coherent-state and Stokes-operator relations.
//!
//! Homodyne outcomes are expressed in a [`QuadratureConvention`]: a coherent
//! state of real amplitude `mu` yields Gaussian outcomes with mean `mu` and
//! variance `vacuum_variance * (1 + excess_noise)`.

use crate::error::{ensure_domain, Result};

/// Normalization of homodyne outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConvention {
    vacuum_variance: f64,
}

impl QuadratureConvention {
    /// Vacuum variance 1/4. The postselected error rate takes the form
    /// `erfc[√2(β₀ + √η α)] / 2P` in this normalization.
    pub const QUARTER: Self = Self { vacuum_variance: 0.25 };

    /// Vacuum variance 1/2 with the outcome mean still equal to the
    /// attenuated amplitude. Used by the rooftop-link key-rate analysis.
    pub const HALF: Self = Self { vacuum_variance: 0.5 };

    pub fn new(vacuum_variance: f64) -> Result<Self> {
        ensure_domain(
            vacuum_variance.is_finite() && vacuum_variance > 0.0,
            "vacuum_variance",
            vacuum_variance,
            "must be finite and positive",
        )?;
        Ok(Self { vacuum_variance })
    }

    pub fn vacuum_variance(&self) -> f64 {
        self.vacuum_variance
    }

    /// Outcome variance of a coherent state carrying `excess_noise`
    /// (shot-noise units).
    pub fn outcome_variance(&self, excess_noise: f64) -> f64 {
        self.vacuum_variance * (1.0 + excess_noise)
    }

    pub fn outcome_std(&self, excess_noise: f64) -> f64 {
        self.outcome_variance(excess_noise).sqrt()
    }
}

impl Default for QuadratureConvention {
    fn default() -> Self {
        Self::QUARTER
    }
}

/// Mean Stokes parameters of a beam, in photon-flux units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesMeans {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesMeans {
    /// A bright beam linearly polarized along x: all flux in `S₁`.
    pub fn x_polarized(flux: f64) -> Self {
        Self {
            s0: flux,
            s1: flux,
            s2: 0.0,
            s3: 0.0,
        }
    }

    /// Whether measured `S₂`/`S₃` variances respect
    /// `Var(S₂)·Var(S₃) ≥ ⟨S₁⟩²`, up to a relative slack.
    pub fn respects_uncertainty(&self, var_s2: f64, var_s3: f64, rel_slack: f64) -> bool {
        let bound = self.s1 * self.s1;
        var_s2 * var_s3 >= bound * (1.0 - rel_slack)
    }
}

/// `ln |⟨γ|−γ⟩| = −2γ²`.
pub fn log_coherent_overlap(gamma: f64) -> Result<f64> {
    ensure_domain(gamma >= 0.0, "gamma", gamma, "amplitude must be non-negative")?;
    Ok(-2.0 * gamma * gamma)
}

/// Overlap `|⟨γ|−γ⟩| = exp(−2γ²)` of two antipodal coherent states.
pub fn coherent_overlap(gamma: f64) -> Result<f64> {
    log_coherent_overlap(gamma).map(f64::exp)
}

/// Minimum of `Var(S₂)·Var(S₃)` allowed for a beam with mean `S₁`.
pub fn stokes_uncertainty_bound(s1_mean: f64) -> Result<f64> {
    ensure_domain(s1_mean >= 0.0, "s1_mean", s1_mean, "must be non-negative")?;
    Ok(s1_mean * s1_mean)
}

/// Certifies a bright beam at the quantum noise limit: for such a beam
/// `|⟨S₀⟩| ≈ |⟨S₁⟩| = Var(S₂)`, so the measured `Var(S₂)` must match the
/// mean flux within `tolerance` (relative).
pub fn shot_noise_check(s0_mean: f64, var_s2: f64, tolerance: f64) -> Result<bool> {
    ensure_domain(s0_mean > 0.0, "s0_mean", s0_mean, "must be positive")?;
    ensure_domain(tolerance >= 0.0, "tolerance", tolerance, "must be non-negative")?;
    Ok((var_s2 - s0_mean).abs() <= tolerance * s0_mean)
}

/// Eigenvalues `(λ₊, λ₋)` of `p|ψ₁⟩⟨ψ₁| + (1−p)|ψ₂⟩⟨ψ₂|` for pure states with
/// `|⟨ψ₁|ψ₂⟩| = overlap`.
pub fn two_state_eigenvalues(p: f64, overlap: f64) -> Result<(f64, f64)> {
    ensure_domain((0.0..=1.0).contains(&p), "p", p, "weight must lie in [0, 1]")?;
    ensure_domain(
        (0.0..=1.0).contains(&overlap),
        "overlap",
        overlap,
        "must lie in [0, 1]",
    )?;
    let q = 1.0 - p;
    // 4pq(1 - c²), written to keep precision when c is close to 1
    let mixedness = 4.0 * p * q * (1.0 - overlap) * (1.0 + overlap);
    let root = (1.0 - mixedness).max(0.0).sqrt();
    let minor = 0.5 * mixedness / (1.0 + root);
    Ok((1.0 - minor, minor))
}

/// Von Neumann entropy (bits) of a two-pure-state mixture.
pub fn two_state_entropy(p: f64, overlap: f64) -> Result<f64> {
    let (major, minor) = two_state_eigenvalues(p, overlap)?;
    Ok(xlog2x(major) + xlog2x(minor))
}

/// `−x log₂ x` with the `0·log 0 = 0` convention.
pub(crate) fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}
