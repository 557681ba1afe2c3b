//! Optimal postselection threshold and signal amplitude, and the curve
//! tables built from them.

use std::cell::RefCell;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{golden_section_max, QuadratureSettings};
use crate::security::{key_rate, AcceptanceRule, SecurityContext};

/// Outcome of a scalar optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationResult {
    /// Optimal threshold or amplitude. Infinite when no outcome carries
    /// positive key information.
    pub argument: f64,
    /// Key rate at the optimum (bits per pulse).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub bracket: (f64, f64),
}

/// Threshold where Bob's reconciled information equals Eve's, i.e. the zero
/// of the pointwise key information. Accepting exactly the outcomes above it
/// maximizes the key rate. `converged` is false when no outcome with
/// non-negligible probability carries positive key information.
pub fn optimal_threshold(
    ctx: &SecurityContext,
    settings: &QuadratureSettings,
) -> Result<OptimizationResult> {
    let base = ctx.clone().with_threshold(0.0);
    let Some(start) = base.positive_region_start()? else {
        return Ok(OptimizationResult {
            argument: f64::INFINITY,
            objective: 0.0,
            iterations: 0,
            converged: false,
            bracket: (f64::INFINITY, f64::INFINITY),
        });
    };
    let report = key_rate(
        &base.with_threshold(start.beta),
        settings,
        AcceptanceRule::Threshold,
    )?;
    // a root far out in the tail, where no outcome ever lands, is no key either
    let objective = report.key_rate.max(0.0);
    Ok(OptimizationResult {
        argument: start.beta,
        objective,
        iterations: start.iterations,
        converged: objective > 0.0,
        bracket: start.bracket,
    })
}

/// Settings for [`optimal_alpha`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSearch {
    pub range: (f64, f64),
    /// Points in the coarse scan that locates the bracket.
    pub scan_points: usize,
    pub tolerance: f64,
}

impl Default for AlphaSearch {
    fn default() -> Self {
        Self {
            range: (0.05, 3.0),
            scan_points: 30,
            tolerance: 1e-4,
        }
    }
}

impl AlphaSearch {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let (lo, hi) = self.range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            bad.push(format!("alpha search range ({lo}, {hi}) must be positive and increasing"));
        }
        if self.scan_points < 3 {
            bad.push("alpha scan needs at least 3 points".into());
        }
        if !(self.tolerance > 0.0) {
            bad.push(format!("alpha tolerance {} must be > 0", self.tolerance));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }
}

/// Postselected key rate at `alpha`, with the threshold placed optimally.
pub fn optimized_key_rate(
    template: &SecurityContext,
    alpha: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let ctx = template.clone().with_alpha(alpha).with_threshold(0.0);
    Ok(key_rate(&ctx, settings, AcceptanceRule::PositiveContributions)?.key_rate)
}

/// Amplitude maximizing the key rate at the template's transmittance,
/// re-optimizing the threshold for every candidate amplitude.
///
/// A coarse scan brackets the best grid point, then golden-section search
/// refines it; the scan guards the refinement against a non-unimodal
/// objective.
pub fn optimal_alpha(
    template: &SecurityContext,
    search: &AlphaSearch,
    settings: &QuadratureSettings,
) -> Result<OptimizationResult> {
    search.validate()?;
    template.validate()?;
    let (lo, hi) = search.range;
    let n = search.scan_points;
    let grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let scan = grid
        .par_iter()
        .map(|&a| optimized_key_rate(template, a, settings))
        .collect::<Result<Vec<f64>>>()?;
    let (best, &best_g) = scan
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan has at least three points");
    if best_g <= 0.0 {
        return Ok(OptimizationResult {
            argument: f64::NAN,
            objective: 0.0,
            iterations: n,
            converged: false,
            bracket: search.range,
        });
    }

    let left = grid[best.saturating_sub(1)];
    let right = grid[(best + 1).min(n - 1)];
    let failure = RefCell::new(None);
    let refined = golden_section_max(
        |a| match optimized_key_rate(template, a, settings) {
            Ok(g) => g,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        left,
        right,
        search.tolerance,
        200,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (argument, objective) = if refined.fx >= best_g {
        (refined.x, refined.fx)
    } else {
        (grid[best], best_g)
    };
    Ok(OptimizationResult {
        argument,
        objective,
        iterations: n + refined.iterations,
        converged: refined.bracket.1 - refined.bracket.0 <= search.tolerance,
        bracket: refined.bracket,
    })
}

/// A CSV-ready table; the independent variable is the first column.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl CurveTable {
    /// Header line followed by one line per row, floats in shortest
    /// round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Validation(vec![format!("{name} grid is empty")]));
    }
    if grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::Validation(vec![format!(
            "{name} grid must be strictly increasing"
        )]));
    }
    Ok(())
}

/// `(eta, alpha_opt, key_rate)` over a transmittance grid.
pub fn alpha_curve(
    etas: &[f64],
    template: &SecurityContext,
    search: &AlphaSearch,
    settings: &QuadratureSettings,
) -> Result<CurveTable> {
    check_grid("eta", etas)?;
    let rows = etas
        .par_iter()
        .map(|&eta| {
            let ctx = SecurityContext { eta, ..template.clone() };
            let opt = optimal_alpha(&ctx, search, settings)?;
            Ok(vec![eta, opt.argument, opt.objective])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveTable {
        columns: vec!["eta", "alpha_opt", "key_rate"],
        rows,
    })
}

/// `(threshold, key_rate)`: the key rate when every outcome above the
/// threshold is kept, negative contributions included.
pub fn key_rate_curve(
    thresholds: &[f64],
    ctx: &SecurityContext,
    settings: &QuadratureSettings,
) -> Result<CurveTable> {
    check_grid("threshold", thresholds)?;
    let rows = thresholds
        .par_iter()
        .map(|&t| {
            let r = key_rate(&ctx.clone().with_threshold(t), settings, AcceptanceRule::Threshold)?;
            Ok(vec![t, r.key_rate])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveTable {
        columns: vec!["threshold", "key_rate"],
        rows,
    })
}

/// `(threshold, error_rate, acceptance_probability)` after postselection.
pub fn error_rate_curve(thresholds: &[f64], ctx: &SecurityContext) -> Result<CurveTable> {
    check_grid("threshold", thresholds)?;
    ctx.validate()?;
    let rows = thresholds
        .iter()
        .map(|&t| {
            let c = ctx.clone().with_threshold(t);
            Ok(vec![t, c.error_rate_postselected()?, c.acceptance_probability()?])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveTable {
        columns: vec!["threshold", "error_rate", "acceptance_probability"],
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::security::CascadeModel;

    fn settings() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    #[test]
    fn lossless_ideal_root_sits_at_origin() {
        let ctx = SecurityContext::new(0.8, 1.0).with_cascade(CascadeModel::Ideal);
        let r = optimal_threshold(&ctx, &settings()).unwrap();
        assert!(r.converged);
        assert_eq!(r.argument, 0.0);
        assert!(r.objective > 0.0);
    }

    #[test]
    fn vanishing_signal_has_no_positive_region() {
        let ctx = SecurityContext::rooftop().with_alpha(0.0);
        let r = optimal_threshold(&ctx, &settings()).unwrap();
        assert!(!r.converged);
        assert_eq!(r.objective, 0.0);
        let tiny = SecurityContext::rooftop().with_alpha(1e-3);
        assert!(!optimal_threshold(&tiny, &settings()).unwrap().converged);
    }

    #[test]
    fn threshold_root_zeroes_the_integrand() {
        for ctx in [
            SecurityContext::rooftop(),
            SecurityContext::new(0.6, 0.5),
            SecurityContext::new(1.1, 0.9).with_cascade(CascadeModel::Constant(1.3)),
        ] {
            let r = optimal_threshold(&ctx, &settings()).unwrap();
            assert!(r.converged);
            assert!(ctx.key_information(r.argument).abs() < 1e-6);
        }
    }

    #[test]
    fn optimum_beats_every_grid_threshold() {
        let ctx = SecurityContext::rooftop();
        let opt = optimal_threshold(&ctx, &settings()).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| 0.05 * i as f64).collect();
        let curve = key_rate_curve(&grid, &ctx, &settings()).unwrap();
        for g in curve.column("key_rate").unwrap() {
            assert!(opt.objective >= g - 1e-12);
        }
    }

    #[test]
    fn flat_objective_is_not_converged() {
        // lossless channel but vanishing range of amplitudes: G stays at ~0
        let ctx = SecurityContext::rooftop();
        let search = AlphaSearch { range: (1e-4, 2e-4), ..Default::default() };
        let r = optimal_alpha(&ctx, &search, &settings()).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn grids_are_checked() {
        let ctx = SecurityContext::rooftop();
        assert!(key_rate_curve(&[], &ctx, &settings()).is_err());
        assert!(error_rate_curve(&[0.5, 0.2], &ctx).is_err());
        assert!(alpha_curve(&[], &ctx, &AlphaSearch::default(), &settings()).is_err());
        assert!(AlphaSearch { range: (1.0, 0.5), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn single_point_curve_matches_direct_call() {
        let ctx = SecurityContext::rooftop();
        let curve = key_rate_curve(&[1.0], &ctx, &settings()).unwrap();
        let direct = key_rate(&ctx.clone().with_threshold(1.0), &settings(), AcceptanceRule::Threshold)
            .unwrap();
        assert_eq!(curve.rows, vec![vec![1.0, direct.key_rate]]);
        assert_eq!(curve.to_csv().lines().count(), 2);
    }
}
