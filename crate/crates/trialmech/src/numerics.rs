//! Scalar numerical kernels: bracketed bisection, golden-section search,
//! adaptive and composite quadrature, and closed-form integrals of
//! `(a + b·x)·exp(−r·x)` used by every piecewise-constant control.

use crate::error::{Error, Result};
use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

/// Default absolute tolerance (in the unknown) for every root finder.
pub const ROOT_TOL: f64 = 1e-10;

/// Bracketed bisection for a root of `f` on `[lo, hi]`.
///
/// Accepts either sign orientation. Endpoint roots are returned exactly.
/// Iterates until the bracket is narrower than `tol` or floating-point
/// resolution is reached.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::RootNotBracketed { lo, hi });
    }
    let a_positive = fa > 0.0;
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if b - a <= tol || m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == a_positive {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(argmax, max)`; the endpoints are also compared so that
/// monotone objectives return the correct corner.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while b - a > tol && iters < 300 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iters += 1;
    }
    let mut best = (0.5 * (a + b), f(0.5 * (a + b)));
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Coarse uniform scan followed by golden-section refinement around the best
/// scan point. Robust for objectives that are unimodal only locally.
pub fn scan_golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n_scan: usize, tol: f64) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let n = n_scan.max(2);
    let h = (hi - lo) / (n as f64);
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=n {
        let x = if i == n { hi } else { lo + h * i as f64 };
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let a = (lo + h * (best_i as f64 - 1.0)).max(lo);
    let b = (lo + h * (best_i as f64 + 1.0)).min(hi);
    let (x, v) = golden_max(&f, a, b, tol);
    if v >= best_v {
        (x, v)
    } else {
        let x = if best_i == n { hi } else { lo + h * best_i as f64 };
        (x, best_v)
    }
}

/// Adaptive (double-exponential) quadrature of a smooth integrand on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    quadrature::integrate(f, a, b, abs_tol).integral
}

/// Adaptive quadrature over `[a, b]` split at interior `breaks` (kinks or
/// jumps of the integrand), so each piece is smooth.
pub fn integrate_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], abs_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let per = abs_tol / (pts.len() as f64);
    pts.windows(2).map(|w| integrate(&f, w[0], w[1], per)).sum()
}

fn gl5() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(5).unwrap()))
}

/// Composite 5-point Gauss–Legendre quadrature on the partition generated by
/// `breaks`, each piece refined so that the total subinterval count is at
/// least `min_sub`.
pub fn composite_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], min_sub: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let total = b - a;
    let rule = gl5();
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        let n = ((min_sub as f64) * len / total).ceil().max(1.0) as usize;
        let h = len / n as f64;
        for k in 0..n {
            let lo = w[0] + h * k as f64;
            let hi = if k + 1 == n { w[1] } else { lo + h };
            acc += rule.integrate(lo, hi, &f);
        }
    }
    acc
}

/// `∫_0^d exp(−r·x) dx`, stable for small `r·d`.
pub fn exp_integral(rate: f64, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    let z = rate * d;
    if z.abs() < 1e-12 {
        d
    } else {
        -(-z).exp_m1() / rate
    }
}

/// `∫_0^d x·exp(−r·x) dx`, stable for small `r·d`.
pub fn x_exp_integral(rate: f64, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    let z = rate * d;
    if z.abs() < 1e-2 {
        // (1 − e^{−z}(1+z))/z² = Σ_k (−z)^k / (k!(k+2))
        let mut sum = 0.0;
        let mut term = 1.0; // (−z)^k / k!
        for k in 0..10 {
            sum += term / (k as f64 + 2.0);
            term *= -z / (k as f64 + 1.0);
        }
        d * d * sum
    } else {
        (1.0 - (-z).exp() * (1.0 + z)) / (rate * rate)
    }
}

/// `∫_0^d (h0 + slope·x)·exp(−r·x) dx`.
pub fn lin_exp_integral(h0: f64, slope: f64, rate: f64, d: f64) -> f64 {
    h0 * exp_integral(rate, d) + slope * x_exp_integral(rate, d)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2_either_orientation() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
        let r = bisect(|x| 2.0 - x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn golden_handles_interior_and_corner() {
        let (x, _) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        let (x, _) = golden_max(|x| x, 0.0, 1.0, 1e-10);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn closed_form_exp_integrals_match_quadrature() {
        for &(h0, s, r, d) in &[(1.0, -0.5, 2.0, 1.5), (0.3, 1.0, 1e-5, 2.0), (2.0, 0.0, 0.0, 1.0), (1.0, 1.0, 0.004, 1.0)] {
            let exact = lin_exp_integral(h0, s, r, d);
            let quad = integrate(|x| (h0 + s * x) * (-r * x).exp(), 0.0, d, 1e-14);
            assert!((exact - quad).abs() < 1e-12, "{exact} vs {quad}");
        }
    }

    #[test]
    fn composite_gl_is_exact_on_polynomials() {
        let v = composite_gl(|x| x.powi(7) - x, 0.0, 2.0, &[0.5], 10);
        assert!((v - (2f64.powi(8) / 8.0 - 2.0)).abs() < 1e-10);
    }
}
