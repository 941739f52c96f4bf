//! Effective potential V0(x), its curvature, saddle points and the
//! large-theta asymptotic minimum.

use crate::csvfmt;
use crate::error::{domain, Result};
use crate::kernel::{KernelMode, PumpKernel};
use crate::model::{MaserParams, NoiseKind, NoiseSpec, NumericControls};
use crate::quad;
use std::io::Write;

/// Default number of scan points for saddle and asymptotic-minimum searches.
pub const SCAN_POINTS: usize = 2048;

/// w(x) = (n_b x + a q)/((1+n_b) x + b q), evaluated through q/x so that
/// x = 0 gives the analytic limit.
pub fn w_ratio(kernel: &PumpKernel, x: f64) -> Result<f64> {
    let p = &kernel.params;
    let r = kernel.q_over_x(x)?;
    Ok((p.n_b + p.a * r) / (1.0 + p.n_b + p.b() * r))
}

/// V0'(x) = -ln w(x).
pub fn v0_prime(kernel: &PumpKernel, x: f64) -> Result<f64> {
    Ok(-w_ratio(kernel, x)?.ln())
}

/// Break points where theta sqrt(x + D^2) crosses multiples of pi/2, so
/// each panel sees at most a quarter oscillation of the sharp kernel.
fn oscillation_breaks(kernel: &PumpKernel, lo: f64, hi: f64) -> Vec<f64> {
    let p = &kernel.params;
    let th = p.theta.abs();
    if th == 0.0 {
        return Vec::new();
    }
    let d2 = p.delta * p.delta;
    let step = std::f64::consts::FRAC_PI_2 / th;
    let s_lo = (lo + d2).sqrt();
    let s_hi = (hi + d2).sqrt();
    let k0 = (s_lo / step).ceil() as i64;
    let k1 = (s_hi / step).floor() as i64;
    if k1 - k0 > 100_000 {
        return Vec::new();
    }
    (k0..=k1)
        .map(|k| (k as f64 * step).powi(2) - d2)
        .filter(|&x| x > lo && x < hi)
        .collect()
}

/// V0(x) = -int_0^x ln w.
pub fn v0(kernel: &PumpKernel, x: f64) -> Result<f64> {
    if x < 0.0 {
        return domain(format!("v0 needs x >= 0, got {x}"));
    }
    v0_increment(kernel, 0.0, x)
}

/// V0(hi) - V0(lo) as a single integral of -ln w.
pub fn v0_increment(kernel: &PumpKernel, lo: f64, hi: f64) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    let breaks = oscillation_breaks(kernel, lo, hi);
    let bad = std::cell::Cell::new(None);
    let f = |v: f64| match v0_prime(kernel, v) {
        Ok(y) if y.is_finite() => y,
        Ok(_) | Err(_) => {
            bad.set(Some(v));
            0.0
        }
    };
    let tol = kernel.quad_tol.max(1e-15);
    let val = quad::integrate(&f, lo, hi, &breaks, tol, &format!("V0 on [{lo}, {hi}]"))?;
    if let Some(v) = bad.get() {
        return Err(crate::MaserError::Quadrature {
            context: format!("ln w is singular near x = {v}"),
            achieved: f64::INFINITY,
            requested: tol,
        });
    }
    Ok(val)
}

/// Exact V0''(x) = -w'(x)/w(x).
pub fn v0_second(kernel: &PumpKernel, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return domain(format!("v0_second needs x > 0, got {x}"));
    }
    let p = &kernel.params;
    let r = kernel.q_over_x(x)?;
    let dq = kernel.derivative(x)?;
    let num = p.n_b + p.a * r;
    let den = 1.0 + p.n_b + p.b() * r;
    Ok((r - dq) / x * (p.a + p.n_b * (2.0 * p.a - 1.0)) / (num * den))
}

/// Saddle-point curvature (2a-1)^2/(a + n_b(2a-1)) (q - x q')/x^2. Equals
/// [`v0_second`] wherever x = (2a-1) q(x).
pub fn v0_second_saddle(kernel: &PumpKernel, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return domain(format!("v0_second_saddle needs x > 0, got {x}"));
    }
    let p = &kernel.params;
    let s = 2.0 * p.a - 1.0;
    let q = kernel.evaluate(x)?;
    let dq = kernel.derivative(x)?;
    Ok(s * s / (p.a + p.n_b * s) * (q - x * dq) / (x * x))
}

#[derive(Debug, Clone)]
pub struct PotentialProfile {
    pub grid: Vec<f64>,
    pub v0: Vec<f64>,
    pub w: Vec<f64>,
    pub params: MaserParams,
    pub noise: NoiseSpec,
    pub mode: KernelMode,
}

impl PotentialProfile {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,v0,w")?;
        for i in 0..self.grid.len() {
            writeln!(
                out,
                "{},{},{}",
                csvfmt::num(self.grid[i]),
                csvfmt::num(self.v0[i]),
                csvfmt::num(self.w[i])
            )?;
        }
        Ok(())
    }
}

/// V0 and w on `points` equally spaced samples of [0, x_hi], accumulated
/// panel by panel.
pub fn potential_profile(kernel: &PumpKernel, x_hi: f64, points: usize) -> Result<PotentialProfile> {
    if x_hi <= 0.0 || points < 2 {
        return domain("profile needs x_hi > 0 and at least two points");
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| x_hi * i as f64 / (points - 1) as f64)
        .collect();
    let mut v = vec![0.0; points];
    for i in 1..points {
        v[i] = v[i - 1] + v0_increment(kernel, grid[i - 1], grid[i])?;
    }
    let w = grid.iter().map(|&x| w_ratio(kernel, x)).collect::<Result<Vec<_>>>()?;
    Ok(PotentialProfile {
        grid,
        v0: v,
        w,
        params: kernel.params,
        noise: kernel.noise,
        mode: kernel.mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaddleKind {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saddle {
    pub x: f64,
    pub kind: SaddleKind,
    pub v0: f64,
    pub v0_second: f64,
    /// 1/sqrt(N V0''), minima only.
    pub sigma_x: Option<f64>,
    /// Gaussian weight of the minimum, minima only.
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleReport {
    /// Ascending in x.
    pub saddles: Vec<Saddle>,
    /// Index into `saddles` of the lowest minimum.
    pub global_min: Option<usize>,
    /// Barrier between the two lowest minima, seen from the higher one.
    pub barrier: Option<f64>,
}

impl SaddleReport {
    pub fn is_thermal(&self) -> bool {
        self.global_min.is_none()
    }

    pub fn minima(&self) -> impl Iterator<Item = &Saddle> {
        self.saddles.iter().filter(|s| s.kind == SaddleKind::Min)
    }
}

/// Sign function for the scan: 1 - (2a-1) q(x)/x shares its sign with V0'.
fn scan_fn(kernel: &PumpKernel, x: f64) -> Result<f64> {
    let s = 2.0 * kernel.params.a - 1.0;
    Ok(1.0 - s * kernel.q_over_x(x)?)
}

/// Sign-change brackets of `f` over the grid, splitting any interval whose
/// midpoint hides a pair of roots.
fn brackets<F: Fn(f64) -> Result<f64>>(f: &F, grid: &[f64]) -> Result<Vec<(f64, f64, f64, f64)>> {
    let vals = grid.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 0..grid.len() - 1 {
        refine(f, grid[i], grid[i + 1], vals[i], vals[i + 1], 0, &mut out)?;
    }
    Ok(out)
}

fn refine<F: Fn(f64) -> Result<f64>>(
    f: &F,
    lo: f64,
    hi: f64,
    flo: f64,
    fhi: f64,
    depth: u32,
    out: &mut Vec<(f64, f64, f64, f64)>,
) -> Result<()> {
    if flo == 0.0 {
        out.push((lo, lo, flo, flo));
        return Ok(());
    }
    if fhi == 0.0 {
        // picked up as the left end of the next interval
        return Ok(());
    }
    if (flo < 0.0) != (fhi < 0.0) {
        out.push((lo, hi, flo, fhi));
        return Ok(());
    }
    if depth >= 12 {
        return Ok(());
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid)?;
    if (fm < 0.0) != (flo < 0.0) || fm == 0.0 {
        refine(f, lo, mid, flo, fm, depth + 1, out)?;
        refine(f, mid, hi, fm, fhi, depth + 1, out)?;
    }
    Ok(())
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: &F, mut lo: f64, mut hi: f64, mut flo: f64, tol: f64) -> Result<f64> {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Roots of x = (2a-1) q(x) on (0, 2a-1] with classification, Gaussian
/// widths and weights, and the barrier between the two lowest minima.
pub fn find_saddles(kernel: &PumpKernel, numerics: &NumericControls) -> Result<SaddleReport> {
    let p = kernel.params;
    let s = 2.0 * p.a - 1.0;
    let empty = SaddleReport {
        saddles: Vec::new(),
        global_min: None,
        barrier: None,
    };
    if s <= 0.0 {
        return Ok(empty);
    }
    let f = |x: f64| scan_fn(kernel, x);
    let grid: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| s * i as f64 / SCAN_POINTS as f64)
        .collect();
    let mut roots = Vec::new();
    for (lo, hi, flo, fhi) in brackets(&f, &grid)? {
        if lo == 0.0 && flo == 0.0 {
            continue;
        }
        let x = if lo == hi { lo } else { bisect(&f, lo, hi, flo, numerics.root_tol)? };
        let rising = if lo == hi { f(x + 1e-9)? > 0.0 } else { fhi > flo };
        if x > 0.0 && roots.last().map_or(true, |&(r, _)| x - r > numerics.root_tol) {
            roots.push((x, rising));
        }
    }
    if roots.is_empty() {
        return Ok(empty);
    }
    let nn = p.n_atoms;
    let mut saddles = Vec::with_capacity(roots.len());
    let mut last_x = 0.0;
    let mut last_v = 0.0;
    for (x, rising) in roots {
        let v = last_v + v0_increment(kernel, last_x, x)?;
        last_x = x;
        last_v = v;
        let c = v0_second(kernel, x)?;
        let kind = if c > 0.0 || (c == 0.0 && rising) {
            SaddleKind::Min
        } else {
            SaddleKind::Max
        };
        let sigma_x = (kind == SaddleKind::Min && c > 0.0).then(|| 1.0 / (nn * c).sqrt());
        saddles.push(Saddle {
            x,
            kind,
            v0: v,
            v0_second: c,
            sigma_x,
            weight: None,
        });
    }
    // weights exp(-N V_j) / sum_m exp(-N V_m)/sqrt(V''_m), in log space
    let terms: Vec<f64> = saddles
        .iter()
        .filter(|s| s.kind == SaddleKind::Min && s.v0_second > 0.0)
        .map(|s| -nn * s.v0 - 0.5 * s.v0_second.ln())
        .collect();
    let global_min = saddles
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == SaddleKind::Min)
        .min_by(|a, b| a.1.v0.partial_cmp(&b.1.v0).unwrap())
        .map(|(i, _)| i);
    if !terms.is_empty() {
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
        for s in saddles.iter_mut() {
            if s.kind == SaddleKind::Min && s.v0_second > 0.0 {
                s.weight = Some((-nn * s.v0 - lse).exp());
            }
        }
    }
    let barrier = lowest_pair_barrier(&saddles);
    Ok(SaddleReport {
        saddles,
        global_min,
        barrier,
    })
}

fn lowest_pair_barrier(saddles: &[Saddle]) -> Option<f64> {
    let mut mins: Vec<usize> = (0..saddles.len())
        .filter(|&i| saddles[i].kind == SaddleKind::Min)
        .collect();
    if mins.len() < 2 {
        return None;
    }
    mins.sort_by(|&i, &j| saddles[i].v0.partial_cmp(&saddles[j].v0).unwrap());
    let (i, j) = (mins[0].min(mins[1]), mins[0].max(mins[1]));
    let top = saddles[i..=j]
        .iter()
        .filter(|s| s.kind == SaddleKind::Max)
        .map(|s| s.v0)
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    Some(top - saddles[i].v0.max(saddles[j].v0))
}

/// Closed form of sum_{n>=1} binom(2n,n) z^n / (n 4^n) = 2 ln(2/(1+sqrt(1-z))).
pub fn r_closed(z: f64) -> f64 {
    let s = (1.0 - z).sqrt();
    -2.0 * (-z / (2.0 * (1.0 + s))).ln_1p()
}

/// Partial sum of the same series with `terms` terms.
pub fn r_series(z: f64, terms: usize) -> f64 {
    let mut c = 1.0; // binom(2n,n)/4^n
    let mut zn = 1.0;
    let mut acc = 0.0;
    for n in 1..=terms {
        let nf = n as f64;
        c *= (2.0 * nf - 1.0) / (2.0 * nf);
        zn *= z;
        acc += c * zn / nf;
    }
    acc
}

/// Large-theta potential slope ln D_b - ln D_a + R(y) - R(w) with the
/// gamma-noise factor E = exp(-2 (x + D^2) sigma^2) (E = 1 without noise).
pub fn v0_prime_asymptotic(params: &MaserParams, noise: &NoiseSpec, x: f64) -> Result<f64> {
    let sig2 = match noise.kind {
        NoiseKind::None => 0.0,
        NoiseKind::PumpGamma => noise.sigma_sq,
        NoiseKind::DetuningGaussian => {
            return domain("asymptotic potential is only available without noise or with pump noise")
        }
    };
    let (a, b, nb) = (params.a, params.b(), params.n_b);
    let u = x + params.delta * params.delta;
    let e = (-2.0 * u * sig2).exp();
    let da = nb * u + 0.5 * a * (1.0 + e);
    let db = (1.0 + nb) * u + 0.5 * b * (1.0 + e);
    let ry = r_closed(a * e / da);
    let rw = if b == 0.0 { 0.0 } else { r_closed(b * e / db) };
    Ok(db.ln() - da.ln() + ry - rw)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticMin {
    pub xbar: f64,
    pub p_plus: f64,
}

/// Large-theta root of x = (2a-1)<q(x)> under zero-mean Gaussian detuning
/// noise much wider than sqrt(x): the phase averages out and
/// <x/(x+D^2)> -> sqrt(pi x/2)/sigma, so x = (2a-1)^2 pi/(8 sigma^2).
pub fn detuning_wide_noise_root(a: f64, sigma_sq: f64) -> Result<f64> {
    if a <= 0.5 || !(sigma_sq > 0.0) {
        return domain(format!("no wide-noise root for a = {a}, sigma^2 = {sigma_sq}"));
    }
    let s = 2.0 * a - 1.0;
    let x = s * s * std::f64::consts::PI / (8.0 * sigma_sq);
    // the averaging needs sigma well above sqrt(x)
    if x > 0.1 * sigma_sq {
        return domain(format!("detuning noise sigma^2 = {sigma_sq} is not wide for root {x}"));
    }
    Ok(x)
}

/// Global minimum of the large-theta potential on (0, 2a-1] and the matching
/// excitation probability a + n_b/N - x.
pub fn asymptotic_min(params: &MaserParams, noise: &NoiseSpec, root_tol: f64) -> Result<AsymptoticMin> {
    let s = 2.0 * params.a - 1.0;
    if s <= 0.0 {
        return domain(format!("no maser minimum for a = {} <= 1/2", params.a));
    }
    let f = |x: f64| v0_prime_asymptotic(params, noise, x);
    let lo = s * 1e-9;
    let grid: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| lo + (s - lo) * i as f64 / SCAN_POINTS as f64)
        .collect();
    let vals = grid.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    // running trapezoid of the slope picks the lowest of several minima
    let mut best: Option<(f64, f64)> = None;
    let mut v = 0.0;
    for i in 0..SCAN_POINTS {
        v += 0.5 * (vals[i] + vals[i + 1]) * (grid[i + 1] - grid[i]);
        if vals[i] < 0.0 && vals[i + 1] >= 0.0 {
            let x = bisect(&f, grid[i], grid[i + 1], vals[i], root_tol)?;
            if best.map_or(true, |(_, bv)| v < bv) {
                best = Some((x, v));
            }
        }
    }
    let xbar = match best {
        Some((x, _)) => x,
        None if vals[SCAN_POINTS] < 0.0 => s,
        None => return domain("large-theta potential has no interior minimum"),
    };
    Ok(AsymptoticMin {
        xbar,
        p_plus: params.a + params.n_b / params.n_atoms - xbar,
    })
}
