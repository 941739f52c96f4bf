//! Atom excitation probabilities, joint probabilities, Poisson resummation
//! and revival analytics.

use crate::error::{domain, MaserError, Result};
use crate::kernel::PumpKernel;
use crate::model::MaserParams;
use crate::quad;
use crate::steady_state::PhotonDistribution;
use crate::tridiag::Tridiagonal;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Band storage of M(+), M(-), L_C and 1 + L_C/N at truncation n_max.
///
/// The truncation is reflecting: an atom cannot emit into n_max + 1 and
/// thermal excitation out of n_max is switched off, so every column of
/// M(+) + M(-) sums to one and every column of L_C sums to zero.
#[derive(Debug, Clone)]
pub struct AtomMatrices {
    pub a: f64,
    pub n_atoms: f64,
    /// q_0 ..= q_{n_max+1} with q_{n_max+1} forced to zero.
    pub q: Vec<f64>,
    pub lc: Tridiagonal,
    pub resolvent: Tridiagonal,
}

/// Photon-damping part L_C with reflecting truncation.
pub fn lc_bands(n_b: f64, n_max: usize) -> Tridiagonal {
    let n = n_max + 1;
    let mut diag: Vec<f64> = (0..n)
        .map(|k| (n_b + 1.0) * k as f64 + n_b * (k + 1) as f64)
        .collect();
    diag[n_max] = (n_b + 1.0) * n_max as f64;
    Tridiagonal {
        sub: (1..n).map(|k| -n_b * k as f64).collect(),
        diag,
        sup: (0..n_max).map(|k| -(n_b + 1.0) * (k + 1) as f64).collect(),
    }
}

impl AtomMatrices {
    pub fn new(params: &MaserParams, q: &[f64], n_max: usize) -> Self {
        let mut qq = q[..=n_max + 1].to_vec();
        qq[n_max + 1] = 0.0;
        let lc = lc_bands(params.n_b, n_max);
        let nn = params.n_atoms;
        let resolvent = Tridiagonal {
            sub: lc.sub.iter().map(|v| v / nn).collect(),
            diag: lc.diag.iter().map(|v| 1.0 + v / nn).collect(),
            sup: lc.sup.iter().map(|v| v / nn).collect(),
        };
        AtomMatrices {
            a: params.a,
            n_atoms: nn,
            q: qq,
            lc,
            resolvent,
        }
    }

    pub fn n_max(&self) -> usize {
        self.q.len() - 2
    }

    /// M(s) p.
    pub fn apply_m(&self, s: Sign, p: &[f64]) -> Vec<f64> {
        let (a, b) = (self.a, 1.0 - self.a);
        let m = self.n_max();
        let q = &self.q;
        (0..=m)
            .map(|n| match s {
                Sign::Plus => {
                    let up = if n < m { b * q[n + 1] * p[n + 1] } else { 0.0 };
                    up + a * (1.0 - q[n + 1]) * p[n]
                }
                Sign::Minus => {
                    let down = if n > 0 { a * q[n] * p[n - 1] } else { 0.0 };
                    down + b * (1.0 - q[n]) * p[n]
                }
            })
            .collect()
    }

    /// (1 + L_C/N)^{-1} v by a tridiagonal solve.
    pub fn apply_resolvent(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.resolvent.solve(v, 1e-12)
    }
}

/// Kernel values for `kernel`, reusing the distribution's table when it was
/// built with the same kernel.
pub fn kernel_table(dist: &PhotonDistribution, kernel: &PumpKernel) -> Result<Vec<f64>> {
    if dist.kernel.as_ref() == Some(kernel) && dist.q.len() >= dist.n_max + 2 {
        Ok(dist.q[..=dist.n_max + 1].to_vec())
    } else {
        kernel.table(0, dist.n_max + 1)
    }
}

fn matrices(dist: &PhotonDistribution, kernel: &PumpKernel) -> Result<AtomMatrices> {
    let q = kernel_table(dist, kernel)?;
    Ok(AtomMatrices::new(&kernel.params, &q, dist.n_max))
}

/// P(+): kernel selects selective (sharp) or averaged measurement.
pub fn p_plus(dist: &PhotonDistribution, kernel: &PumpKernel) -> Result<f64> {
    let m = matrices(dist, kernel)?;
    Ok(m.apply_m(Sign::Plus, &dist.probs).iter().sum())
}

/// P(-), computed independently of P(+).
pub fn p_minus(dist: &PhotonDistribution, kernel: &PumpKernel) -> Result<f64> {
    let m = matrices(dist, kernel)?;
    Ok(m.apply_m(Sign::Minus, &dist.probs).iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointProbabilities {
    pub p_plus: f64,
    pub p_minus: f64,
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

impl JointProbabilities {
    pub fn get(&self, s1: Sign, s2: Sign) -> f64 {
        match (s1, s2) {
            (Sign::Plus, Sign::Plus) => self.pp,
            (Sign::Plus, Sign::Minus) => self.pm,
            (Sign::Minus, Sign::Plus) => self.mp,
            (Sign::Minus, Sign::Minus) => self.mm,
        }
    }
}

/// All four P(s1, s2) = u^T M(s2) (1 + L_C/N)^{-1} M(s1) p together with P(+-).
pub fn p_joint_all(dist: &PhotonDistribution, kernel: &PumpKernel) -> Result<JointProbabilities> {
    let m = matrices(dist, kernel)?;
    let mut out = [0.0; 4];
    let mut single = [0.0; 2];
    for (i, s1) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
        let v = m.apply_m(s1, &dist.probs);
        single[i] = v.iter().sum();
        let y = m.apply_resolvent(&v)?;
        for (j, s2) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
            out[2 * i + j] = m.apply_m(s2, &y).iter().sum();
        }
    }
    Ok(JointProbabilities {
        p_plus: single[0],
        p_minus: single[1],
        pp: out[0],
        pm: out[1],
        mp: out[2],
        mm: out[3],
    })
}

pub fn p_joint(dist: &PhotonDistribution, kernel: &PumpKernel, s1: Sign, s2: Sign) -> Result<f64> {
    Ok(p_joint_all(dist, kernel)?.get(s1, s2))
}

/// Large-theta relation between P(+,+) and P(+) at a = 1, Delta = 0.
pub fn asymptotic_joint(p_inf_plus: f64) -> f64 {
    (5.0 * p_inf_plus - 1.0) / 4.0
}

/// Peaked-limit forms: (a - (2a-1)<q(x)>, a - x).
pub fn p_plus_peaked_limit(kernel: &PumpKernel, xbar: f64) -> Result<(f64, f64)> {
    let a = kernel.params.a;
    Ok((a - (2.0 * a - 1.0) * kernel.evaluate(xbar)?, a - xbar))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResumMode {
    Exact,
    Peaked,
}

#[derive(Debug, Clone)]
pub struct Resummed {
    pub p_plus: f64,
    /// w_0 followed by the combined nu >= 1 terms that were summed explicitly.
    pub terms: Vec<f64>,
    /// Analytic remainder added for nu beyond the explicit terms (exact mode).
    pub tail: f64,
    pub warning: Option<String>,
}

/// Hurwitz zeta sum over k >= 0 of (z+k)^-s, s > 1, by Euler-Maclaurin.
fn hurwitz_zeta(s: f64, z: f64) -> f64 {
    const B2: [f64; 6] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0];
    let shift = 12;
    let mut acc: f64 = (0..shift).map(|k| (z + k as f64).powf(-s)).sum();
    let x = z + shift as f64;
    acc += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    let mut rising = s;
    let mut fact = 2.0;
    for (j, b) in B2.iter().enumerate() {
        let j = (j + 1) as f64;
        acc += b / fact * rising * x.powf(-s - 2.0 * j + 1.0);
        rising *= (s + 2.0 * j - 1.0) * (s + 2.0 * j);
        fact *= (2.0 * j + 1.0) * (2.0 * j + 2.0);
    }
    acc
}

/// Poisson-resummed P(+).
///
/// Exact mode: writes the oscillating part of P(+) at a = 1 as
/// F(0)/2 + sum over nu of the Fourier integrals of F(t) = p(t) g(t)
/// cos(2 theta sqrt((t+1)/N + D^2)), with p(t) the piecewise-linear
/// interpolant of the per-integer probabilities. The nu >= 1 integrals are
/// taken as cosine pairs over the periodized sum of F on [0, 1]; their
/// 1/nu^2 and 1/nu^4 asymptotes, fixed by the derivative jumps of F at the
/// integers, are summed analytically beyond the last explicit term.
///
/// Peaked mode: Gaussian p(x) around x-bar with width sigma_x from the
/// distribution moments, terms up to `nu_max`.
///
/// Both modes use the affine map P -> 1 - a + (2a-1) P when a != 1.
pub fn p_plus_resummed(
    dist: &PhotonDistribution,
    params: &MaserParams,
    nu_max: usize,
    mode: ResumMode,
) -> Result<Resummed> {
    let mut r = match mode {
        ResumMode::Exact => resummed_exact(dist, params, nu_max)?,
        ResumMode::Peaked => resummed_peaked(dist, params, nu_max),
    };
    let a = params.a;
    if a != 1.0 {
        r.p_plus = 1.0 - a + (2.0 * a - 1.0) * r.p_plus;
    }
    Ok(r)
}

fn resummed_exact(dist: &PhotonDistribution, params: &MaserParams, nu_cap: usize) -> Result<Resummed> {
    let nn = params.n_atoms;
    let d2 = params.delta * params.delta;
    let th = params.theta;
    let p = &dist.probs;
    let m = dist.n_max;
    let g = |t: f64| (t + 1.0) / (t + 1.0 + nn * d2);
    let h = |t: f64| g(t) * (2.0 * th * ((t + 1.0) / nn + d2).sqrt()).cos();
    let p_lin = |n: usize, s: f64| {
        let hi = if n < m { p[n + 1] } else { 0.0 };
        (1.0 - s) * p[n] + s * hi
    };
    // periodized F on [0, 1]
    let phi = |s: f64| (0..=m).map(|n| p_lin(n, s) * h(n as f64 + s)).sum::<f64>();
    let f0 = p[0] * h(0.0);
    // h and its first three t-derivatives
    let c0 = nn * d2;
    let hd = |t: f64| -> [f64; 4] {
        let w = t + 1.0 + c0;
        let gs = [(t + 1.0) / w, c0 / (w * w), -2.0 * c0 / w.powi(3), 6.0 * c0 / w.powi(4)];
        let v = (t + 1.0) / nn + d2;
        let ph = 2.0 * th * v.sqrt();
        let p1 = th / (nn * v.sqrt());
        let p2 = -th / (2.0 * nn * nn * v.powf(1.5));
        let p3 = 3.0 * th / (4.0 * nn.powi(3) * v.powf(2.5));
        let (sn, cs) = ph.sin_cos();
        let cd = [
            cs,
            -sn * p1,
            -cs * p1 * p1 - sn * p2,
            sn * p1.powi(3) - 3.0 * cs * p1 * p2 - sn * p3,
        ];
        [
            gs[0] * cd[0],
            gs[1] * cd[0] + gs[0] * cd[1],
            gs[2] * cd[0] + 2.0 * gs[1] * cd[1] + gs[0] * cd[2],
            gs[3] * cd[0] + 3.0 * gs[2] * cd[1] + 3.0 * gs[1] * cd[2] + gs[0] * cd[3],
        ]
    };
    // F = p_lin h has slope jumps at every integer; the cosine coefficients of
    // the periodized sum behave as 2 J1/w^2 - 2 J3/w^4 with J1, J3 the jumps of
    // its first and third derivatives across s = 0 (w = 2 pi nu).
    let slope = |k: usize| if k < m { p[k + 1] - p[k] } else { -p[m] };
    let h0 = hd(0.0);
    let mut j1 = -(slope(0) * h0[0] + p[0] * h0[1]);
    let mut j3 = -(3.0 * slope(0) * h0[2] + p[0] * h0[3]);
    for k in 1..=m + 1 {
        let jump = slope(k - 1) - if k <= m { slope(k) } else { 0.0 };
        let hk = hd(k as f64);
        j1 += jump * hk[0];
        j3 += 3.0 * jump * hk[2];
    }
    let asym = |nu: f64| {
        let w2 = (2.0 * PI * nu).powi(2);
        2.0 * j1 / w2 - 2.0 * j3 / (w2 * w2)
    };
    let nonosc: f64 = (0..=m).map(|n| p[n] * g(n as f64)).sum();

    let nu_cap = nu_cap.max(1);
    let mut k = 64usize.min(nu_cap);
    loop {
        let panels = (k / 4).max(16);
        let rule = quad::gauss_legendre(24);
        let mut nodes = Vec::with_capacity(panels * 24);
        for i in 0..panels {
            let lo = i as f64 / panels as f64;
            let half = 0.5 / panels as f64;
            for (x, w) in rule.x.iter().zip(&rule.w) {
                let s = lo + half * (1.0 + x);
                nodes.push((s, w * half, phi(s)));
            }
        }
        let w0: f64 = nodes.iter().map(|(_, w, f)| w * f).sum();
        let mut terms = vec![w0];
        let mut small = 0;
        let mut converged = false;
        for nu in 1..=k {
            let c: f64 = nodes
                .iter()
                .map(|(s, w, f)| 2.0 * w * f * (2.0 * PI * nu as f64 * s).cos())
                .sum();
            terms.push(c);
            if (c - asym(nu as f64)).abs() < 1e-12 {
                small += 1;
                if small >= 2 {
                    converged = true;
                    break;
                }
            } else {
                small = 0;
            }
        }
        let used = terms.len() - 1;
        if converged || k >= nu_cap {
            let z = used as f64 + 1.0;
            let tail = 2.0 * j1 / (2.0 * PI).powi(2) * hurwitz_zeta(2.0, z)
                - 2.0 * j3 / (2.0 * PI).powi(4) * hurwitz_zeta(4.0, z);
            let osc = 0.5 * f0 + terms.iter().sum::<f64>() + tail;
            let warning = if converged {
                None
            } else {
                Some(format!("nu sum stopped at cap {nu_cap} before terms fell below 1e-12"))
            };
            return Ok(Resummed {
                p_plus: 1.0 - 0.5 * nonosc + 0.5 * osc,
                terms,
                tail,
                warning,
            });
        }
        k = (2 * k).min(nu_cap);
    }
}

fn resummed_peaked(dist: &PhotonDistribution, params: &MaserParams, nu_max: usize) -> Resummed {
    let nn = params.n_atoms;
    let d2 = params.delta * params.delta;
    let th = params.theta;
    let xbar = dist.order_parameter();
    let sx = dist.std_x();
    let u = xbar + d2;
    let ratio = xbar / u;
    let gauss = |x: f64| {
        (-(x - xbar).powi(2) / (2.0 * sx * sx)).exp() / (2.0 * PI * nn * nn * sx * sx).sqrt()
    };
    let w0 = ratio * (-th * th * sx * sx / (2.0 * u)).exp() * (2.0 * th * u.sqrt()).cos();
    let mut terms = vec![w0];
    for nu in 1..=nu_max {
        let nf = nu as f64;
        let s0 = th / (2.0 * PI * nf * nn);
        let x_nu = s0 * s0 - d2;
        let phase = 2.0 * PI * nf * nn * (s0 * s0 + d2) - PI / 4.0;
        terms.push(gauss(x_nu) * ratio * th / (PI * (2.0 * nf.powi(3) * nn).sqrt()) * phase.cos());
    }
    let warning = if xbar <= 5.0 * sx {
        Some(format!("distribution not peaked: x = {xbar:.4}, sigma_x = {sx:.4}"))
    } else {
        None
    };
    Resummed {
        p_plus: 1.0 - 0.5 * ratio + 0.5 * terms.iter().sum::<f64>(),
        terms,
        tail: 0.0,
        warning,
    }
}

/// Revival positions theta_nu and widths for nu >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RevivalStructure {
    /// (theta_nu, delta_theta_nu) for nu = 1 ..= max(nu_max, 1).
    pub revivals: Vec<(f64, f64)>,
    pub nu_max: usize,
    pub xbar: f64,
    pub sigma_x: f64,
    pub delta: f64,
    pub n_atoms: f64,
}

/// Revivals from the separation condition nu < (x + D^2)/sigma_x - 1/2.
pub fn revival_structure(xbar: f64, sigma_x: f64, delta: f64, n_atoms: f64) -> Result<RevivalStructure> {
    let u = xbar + delta * delta;
    if u <= 0.0 || sigma_x <= 0.0 {
        return domain("revival structure needs x + D^2 > 0 and sigma_x > 0");
    }
    let bound = u / sigma_x - 0.5;
    let nu_max = if bound > 0.0 { bound.floor() as usize } else { 0 };
    let revivals = (1..=nu_max.max(1))
        .map(|nu| {
            let nf = nu as f64;
            (2.0 * PI * nf * n_atoms * u.sqrt(), PI * nf * n_atoms * sigma_x / u.sqrt())
        })
        .collect();
    Ok(RevivalStructure {
        revivals,
        nu_max,
        xbar,
        sigma_x,
        delta,
        n_atoms,
    })
}

/// Closed-form revival bound quoted for broad pump noise with x = a - 1/2:
/// nu < sqrt(2N) (2a-1)/sqrt(a + n_b(2a-1)) - 1/2.
pub fn revival_bound_pump_noise(n_atoms: f64, a: f64, n_b: f64) -> usize {
    let v = (2.0 * n_atoms).sqrt() * (2.0 * a - 1.0) / (a + n_b * (2.0 * a - 1.0)).sqrt() - 0.5;
    v.max(0.0).floor() as usize
}

/// Closed-form revival bound for broad Gaussian detuning noise.
pub fn revival_bound_detuning_noise(n_atoms: f64, a: f64, n_b: f64, sigma_sq: f64) -> usize {
    let c = 2.0 * a - 1.0;
    let v = (n_atoms / sigma_sq * c.powi(3) * PI / (16.0 * (a + n_b * c))).sqrt() - 0.5;
    v.max(0.0).floor() as usize
}

/// Width of the amplitude window in oscillation periods pi/sqrt(x + D^2).
pub const ENVELOPE_PERIODS: f64 = 4.0;

/// Revival peaks found in a sampled P(theta) curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RevivalScan {
    /// Envelope maximum location near each theta_nu (None if the window is
    /// outside the sampled range).
    pub peaks: Vec<Option<f64>>,
    /// Number of leading revivals separated from both neighbours.
    pub resolved: usize,
}

/// Finds revivals in samples of P(theta). The local oscillation amplitude is
/// the RMS deviation of P over a sliding window of ENVELOPE_PERIODS
/// oscillation periods, long enough to average out the beating of the
/// discrete photon frequencies between revivals. A revival counts as resolved
/// when the amplitude dips below half of both neighbouring peaks on each side.
pub fn scan_revivals(thetas: &[f64], values: &[f64], rs: &RevivalStructure, nu_hi: usize) -> Result<RevivalScan> {
    if thetas.len() != values.len() || thetas.len() < 3 {
        return Err(MaserError::Domain("need matching theta/value samples".into()));
    }
    if thetas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MaserError::Domain("theta samples must be strictly increasing".into()));
    }
    let u = rs.xbar + rs.delta * rs.delta;
    let period = PI / u.sqrt();
    let half = 0.5 * ENVELOPE_PERIODS * period;
    let (mut s1, mut s2) = (vec![0.0], vec![0.0]);
    for v in values {
        s1.push(s1.last().unwrap() + v);
        s2.push(s2.last().unwrap() + v * v);
    }
    let (mut lo, mut hi) = (0, 0);
    let env: Vec<f64> = thetas
        .iter()
        .map(|&t| {
            while thetas[lo] < t - half {
                lo += 1;
            }
            while hi < thetas.len() && thetas[hi] <= t + half {
                hi += 1;
            }
            let n = (hi - lo) as f64;
            let mean = (s1[hi] - s1[lo]) / n;
            ((s2[hi] - s2[lo]) / n - mean * mean).max(0.0).sqrt()
        })
        .collect();
    let t_last = *thetas.last().unwrap();
    let centre = |nu: usize| 2.0 * PI * nu as f64 * rs.n_atoms * u.sqrt();
    let width = |nu: usize| PI * nu as f64 * rs.n_atoms * rs.sigma_x / u.sqrt();
    let window_max = |lo: f64, hi: f64| {
        thetas
            .iter()
            .zip(&env)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .fold((f64::NAN, 0.0f64), |acc, (t, e)| if *e > acc.1 { (*t, *e) } else { acc })
    };
    let window_min = |lo: f64, hi: f64| {
        thetas
            .iter()
            .zip(&env)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .fold(f64::INFINITY, |m, (_, e)| m.min(*e))
    };
    let mut peaks = Vec::new();
    let mut heights = Vec::new();
    for nu in 0..=nu_hi + 1 {
        let (c, w) = (centre(nu), width(nu).max(period));
        if c + w > t_last {
            peaks.push(None);
            heights.push(f64::NAN);
            continue;
        }
        let (tp, hp) = window_max(c - w, c + w);
        peaks.push(if tp.is_nan() { None } else { Some(tp) });
        heights.push(hp);
    }
    let mut resolved = 0;
    for nu in 1..=nu_hi {
        let (Some(tp), Some(tprev)) = (peaks[nu], peaks[nu - 1]) else { break };
        let dip_before = window_min(tprev, tp);
        let sep_before = dip_before < 0.5 * heights[nu].min(heights[nu - 1]);
        let sep_after = match peaks[nu + 1] {
            Some(tn) => window_min(tp, tn) < 0.5 * heights[nu].min(heights[nu + 1]),
            None => false,
        };
        if heights[nu] > 1e-3 && sep_before && sep_after {
            resolved += 1;
        } else {
            break;
        }
    }
    Ok(RevivalScan {
        peaks: peaks.into_iter().skip(1).take(nu_hi).collect(),
        resolved,
    })
}
