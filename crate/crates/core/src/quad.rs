//! Quadrature rules: Gauss-Legendre, adaptive Gauss-Kronrod 7-15, Gauss-Hermite.

use crate::error::{MaserError, Result};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 7-15 panel: (kronrod estimate, |kronrod - gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

/// Globally adaptive Gauss-Kronrod over [a, b] with absolute tolerance `tol`.
/// `breaks` seeds the initial panels (need not include a or b).
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
    max_panels: usize,
) -> std::result::Result<f64, f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a.min(b) && x < a.max(b)));
    pts.push(b);
    let last = pts.len() - 1;
    if b < a {
        pts[1..last].sort_by(|x, y| y.partial_cmp(x).unwrap());
    } else {
        pts[1..last].sort_by(|x, y| x.partial_cmp(y).unwrap());
    }
    let mut panels: Vec<(f64, f64, f64, f64)> = pts
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= tol {
            return Ok(panels.iter().map(|p| p.2).sum());
        }
        if panels.len() >= max_panels {
            return Err(err);
        }
        // split the worst panel
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, _, _) = panels[i];
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            return Err(err);
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        panels[i] = (lo, mid, v1, e1);
        panels.push((mid, hi, v2, e2));
    }
}

/// Adaptive integration that reports a [`MaserError::Quadrature`] on failure.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
    context: &str,
) -> Result<f64> {
    adaptive(f, a, b, breaks, tol, 20_000).map_err(|achieved| MaserError::Quadrature {
        context: context.to_string(),
        achieved,
        requested: tol,
    })
}

/// Nodes and weights of an n-point rule on [-1, 1] (or weight e^{-x^2} for Hermite).
#[derive(Debug, Clone)]
pub struct Rule {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

fn cache() -> &'static Mutex<HashMap<(u8, usize), Arc<Rule>>> {
    static C: OnceLock<Mutex<HashMap<(u8, usize), Arc<Rule>>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(kind: u8, n: usize, build: fn(usize) -> Rule) -> Arc<Rule> {
    if let Some(r) = cache().lock().unwrap().get(&(kind, n)) {
        return r.clone();
    }
    let r = Arc::new(build(n));
    cache().lock().unwrap().insert((kind, n), r.clone());
    r
}

pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    cached(0, n, build_legendre)
}

pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    cached(1, n, build_hermite)
}

fn build_legendre(n: usize) -> Rule {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Rule { x, w }
}

// Golub-Welsch: eigenvalues of the Jacobi matrix are the nodes, squared first
// eigenvector components give the weights. Implicit QL tracking row 0 only.
fn build_hermite(n: usize) -> Rule {
    let mut d = vec![0.0f64; n];
    let mut e: Vec<f64> = (0..n).map(|i| ((i + 1) as f64 / 2.0).sqrt()).collect();
    e[n - 1] = 0.0;
    let mut z = vec![0.0f64; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 60, "Hermite rule did not converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let fz = z[i + 1];
                z[i + 1] = s * z[i] + c * fz;
                z[i] = c * z[i] - s * fz;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let sp = PI.sqrt();
    let mut x: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let mut w: Vec<f64> = idx.iter().map(|&i| sp * z[i] * z[i]).collect();
    // enforce exact symmetry
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let xm = 0.5 * (x[j] - x[i]);
        let wm = 0.5 * (w[i] + w[j]);
        x[i] = -xm;
        x[j] = xm;
        w[i] = wm;
        w[j] = wm;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Rule { x, w }
}

/// Fixed-order Gauss-Legendre integral over [a, b].
pub fn legendre_integral<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rule: &Rule) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule.x
        .iter()
        .zip(&rule.w)
        .map(|(x, w)| w * f(c + h * x))
        .sum::<f64>()
        * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(10);
        let v = legendre_integral(&|x: f64| x.powi(18), -1.0, 1.0, &r);
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        assert!((r.w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        for n in [64, 128, 256] {
            let r = gauss_hermite(n);
            let m0: f64 = r.w.iter().sum();
            let m2: f64 = r.x.iter().zip(&r.w).map(|(x, w)| w * x * x).sum();
            assert!((m0 - PI.sqrt()).abs() < 1e-12, "n={n} m0={m0}");
            assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        let v = adaptive(&|x: f64| -x.ln(), 0.0, 1.0, &[], 1e-12, 5000).unwrap();
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_reversed_interval() {
        let v = adaptive(&|x: f64| x.sin(), PI, 0.0, &[1.0], 1e-13, 100).unwrap();
        assert!((v + 2.0).abs() < 1e-12);
    }
}
