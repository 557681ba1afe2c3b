//! Scalar numerics: adaptive Gauss–Kronrod quadrature, Brent root
//! bracketing and golden-section maximization.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod abscissae on [-1, 1] (non-negative half) and weights,
// with the embedded 7-point Gauss weights at the odd Kronrod nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Number of equal panels the interval is split into before adaptation.
    pub initial_panels: usize,
    pub max_segments: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-15,
            initial_panels: 8,
            max_segments: 2000,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.rel_tol > 0.0) {
            bad.push(format!("quadrature rel_tol must be > 0 (got {})", self.rel_tol));
        }
        if !(self.abs_tol >= 0.0) {
            bad.push(format!("quadrature abs_tol must be >= 0 (got {})", self.abs_tol));
        }
        if self.initial_panels == 0 {
            bad.push("quadrature initial_panels must be >= 1".to_string());
        }
        if self.max_segments < self.initial_panels {
            bad.push("quadrature max_segments must be >= initial_panels".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Same tolerances with twice as many starting panels.
    pub fn doubled(&self) -> Self {
        Self {
            initial_panels: self.initial_panels * 2,
            max_segments: self.max_segments * 2,
            ..*self
        }
    }
}

/// Value and bookkeeping returned by [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub segments: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[lo, hi]`.
///
/// The segment with the largest error estimate is bisected until the summed
/// estimate drops below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    settings: &QuadratureSettings,
) -> Result<Quadrature> {
    settings.validate()?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain {
            name: "integration bound",
            value: if lo.is_finite() { hi } else { lo },
            reason: "bounds must be finite",
        });
    }
    if lo == hi {
        return Ok(Quadrature {
            value: 0.0,
            error_estimate: 0.0,
            segments: 0,
            evaluations: 0,
        });
    }
    let (a, b, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };

    let n = settings.initial_panels;
    let width = (b - a) / n as f64;
    let mut heap = BinaryHeap::with_capacity(settings.max_segments);
    for i in 0..n {
        let s = a + width * i as f64;
        let e = if i + 1 == n { b } else { s + width };
        heap.push(kronrod15(&f, s, e));
    }
    let mut evaluations = 15 * n;

    loop {
        let value: f64 = heap.iter().map(|s| s.value).sum();
        let error: f64 = heap.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::NonConvergence(format!(
                "integrand produced a non-finite value on [{a}, {b}]"
            )));
        }
        let target = settings.abs_tol.max(settings.rel_tol * value.abs());
        if error <= target {
            return Ok(Quadrature {
                value: sign * value,
                error_estimate: error,
                segments: heap.len(),
                evaluations,
            });
        }
        if heap.len() >= settings.max_segments {
            return Err(Error::NonConvergence(format!(
                "quadrature on [{a}, {b}] reached {} segments with error estimate {error:e} \
                 (target {target:e}, value {value})",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            return Err(Error::NonConvergence(format!(
                "segment [{}, {}] cannot be bisected further (error estimate {error:e})",
                worst.lo, worst.hi
            )));
        }
        heap.push(kronrod15(&f, worst.lo, mid));
        heap.push(kronrod15(&f, mid, worst.hi));
        evaluations += 30;
    }
}

/// Result of a bracketed scalar search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracketed {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

/// Brent's method for a root of `f` in `[a, b]`; `f(a)` and `f(b)` must not
/// share a sign. Stops when the bracket is narrower than `xtol`.
pub fn brent_root<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<Bracketed> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(Bracketed { x: a, fx: fa, iterations: 0, bracket: (a, a) });
    }
    if fb == 0.0 {
        return Ok(Bracketed { x: b, fx: fb, iterations: 0, bracket: (b, b) });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NonConvergence(format!(
            "root not bracketed: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            let bracket = if b < c { (b, c) } else { (c, b) };
            return Ok(Bracketed { x: b, fx: fb, iterations: iter, bracket });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::NonConvergence(format!(
        "Brent root search exceeded {max_iter} iterations near x = {b}"
    )))
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<Bracketed> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for iter in 1..=max_iter {
        if b - a <= xtol {
            let (x, fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
            return Ok(Bracketed { x, fx, iterations: iter, bracket: (a, b) });
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    Err(Error::NonConvergence(format!(
        "golden-section search exceeded {max_iter} iterations on [{a}, {b}]"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_integrates_polynomials_exactly() {
        // degree 22 is inside the 15-point Kronrod exactness range
        let q = integrate(|x| x.powi(22), 0.0, 1.0, &QuadratureSettings::default()).unwrap();
        assert!((q.value - 1.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let s = QuadratureSettings::default();
        let fwd = integrate(f64::exp, 0.0, 2.0, &s).unwrap().value;
        let rev = integrate(f64::exp, 2.0, 0.0, &s).unwrap().value;
        assert!((fwd + rev).abs() < 1e-14);
        assert!((fwd - (2f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_integral() {
        let q = integrate(
            |x| (-x * x).exp(),
            -12.0,
            12.0,
            &QuadratureSettings::default(),
        )
        .unwrap();
        assert!((q.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn segment_budget_exhaustion_is_reported() {
        let s = QuadratureSettings {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            initial_panels: 1,
            max_segments: 3,
        };
        let err = integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, &s).unwrap_err();
        assert!(matches!(err, Error::NonConvergence(_)));
    }

    #[test]
    fn invalid_settings_rejected() {
        let s = QuadratureSettings {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            integrate(|x| x, 0.0, 1.0, &s),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn brent_finds_sqrt2() {
        let r = brent_root(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 100).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-13);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-13);
    }

    #[test]
    fn brent_requires_sign_change() {
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let r = golden_section_max(|x| -(x - 0.3).powi(2), -1.0, 2.0, 1e-8, 200).unwrap();
        assert!((r.x - 0.3).abs() < 1e-7);
    }
}
