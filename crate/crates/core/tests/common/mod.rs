//! Reference integrators written independently of the library's quadrature.
#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;
use gauss_quad::GaussLegendre;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    // below a few ulps of the panel value the estimate is rounding noise
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || diff.abs() <= 15.0 * tol.max(floor) {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson with Richardson correction on one interval.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Adaptive Simpson over consecutive panels of width at most `panel`.
pub fn simpson_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panel: f64, tol: f64) -> f64 {
    let n = ((b - a) / panel).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| simpson(f, a + i as f64 * h, a + (i + 1) as f64 * h, tol / n as f64))
        .sum()
}

/// <g(xi)> over the gamma density with mean theta and variance sigma^2, by
/// fixed Gauss-Legendre panels of width at most `panel`, which should resolve
/// the oscillations of g. Toward xi = 0 the panels shrink geometrically, so
/// xi^(k-1) is smooth on each; g is assumed to vanish at the origin. At
/// shape 1e6 the log-density terms reach 1e7, which caps accuracy near 1e-9.
pub fn gamma_average<G: Fn(f64) -> f64>(g: &G, theta: f64, sigma_sq: f64, panel: f64) -> f64 {
    let k = theta * theta / sigma_sq;
    let beta = theta / sigma_sq;
    let sigma = sigma_sq.sqrt();
    let log_norm = k * beta.ln() - ln_gamma(k);
    let dens = |xi: f64| {
        if xi <= 0.0 {
            0.0
        } else {
            (log_norm + (k - 1.0) * xi.ln() - beta * xi).exp() * g(xi)
        }
    };
    let rule = GaussLegendre::new(NonZeroUsize::new(24).unwrap());
    let lo = (theta - 40.0 * sigma).max(0.0);
    let hi = theta + 40.0 * sigma + 40.0 / beta;
    let w = panel.min(0.25 * sigma);
    let n = ((hi - lo) / w).ceil().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    let mut total: f64 = (0..n)
        .map(|i| {
            let a = lo + i as f64 * h;
            if a == 0.0 {
                0.0
            } else {
                rule.integrate(a, a + h, &dens)
            }
        })
        .sum();
    if lo == 0.0 {
        let mut b = h;
        for _ in 0..60 {
            total += rule.integrate(0.5 * b, b, &dens);
            b *= 0.5;
        }
    }
    total
}

pub fn q_sharp_ref(x: f64, xi: f64, delta: f64) -> f64 {
    let u = x + delta * delta;
    x / u * (xi * u.sqrt()).sin().powi(2)
}

/// Oscillation period in xi of sin^2(xi sqrt u).
pub fn xi_period(u: f64) -> f64 {
    PI / u.sqrt()
}
