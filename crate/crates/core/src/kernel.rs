//! Atomic transition probability q(x), sharp and noise-averaged.

use crate::error::{domain, MaserError, Result};
use crate::model::{MaserParams, NoiseKind, NoiseSpec, ValidatedConfig};
use crate::quad;
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// Evaluate at the mean parameters, ignoring noise (selective measurement).
    Sharp,
    /// Average over the noise density.
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpKernel {
    pub params: MaserParams,
    pub noise: NoiseSpec,
    pub mode: KernelMode,
    pub quad_tol: f64,
}

fn sinc(s: f64) -> f64 {
    if s.abs() < 1e-4 {
        1.0 - s * s / 6.0
    } else {
        s.sin() / s
    }
}

/// sin^2(theta sqrt(u)) / u, finite at u = 0.
fn sin2_over_u(theta: f64, u: f64) -> f64 {
    let s = sinc(theta * u.sqrt());
    theta * theta * s * s
}

/// q(x) = x/(x+D^2) sin^2(theta sqrt(x+D^2)).
pub fn q_sharp(x: f64, theta: f64, delta: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let u = x + delta * delta;
    (x * sin2_over_u(theta, u)).clamp(0.0, 1.0)
}

fn dq_sharp(x: f64, theta: f64, delta: f64) -> f64 {
    let d2 = delta * delta;
    let u = x + d2;
    if u == 0.0 {
        return theta * theta;
    }
    let r = u.sqrt();
    d2 / u * sin2_over_u(theta, u) + x / u * theta * (2.0 * theta * r).sin() / (2.0 * r)
}

/// Gamma-density pieces at u = x + D^2: returns (A, B) with the characteristic
/// function at 2 sqrt(u) equal to e^{A + iB}.
fn gamma_phase(theta: f64, sigma_sq: f64, u: f64) -> (f64, f64) {
    let k = theta * theta / sigma_sq;
    let c = 4.0 * sigma_sq * sigma_sq / (theta * theta);
    let a = -0.5 * k * (c * u).ln_1p();
    let b = k * (2.0 * sigma_sq * u.sqrt() / theta).atan();
    (a, b)
}

/// 1 - Re<e^{2 i xi sqrt(u)}> without cancellation.
fn gamma_one_minus_re(theta: f64, sigma_sq: f64, u: f64) -> f64 {
    let (a, b) = gamma_phase(theta, sigma_sq, u);
    let s = (0.5 * b).sin();
    -a.exp_m1() + a.exp() * 2.0 * s * s
}

/// I1(theta, x) = <sin^2(xi sqrt(u))>/u over the gamma density.
pub fn i_one_pump(theta: f64, sigma_sq: f64, x: f64, delta: f64) -> f64 {
    let u = x + delta * delta;
    if sigma_sq == 0.0 {
        return sin2_over_u(theta, u);
    }
    if u == 0.0 {
        return sigma_sq + theta * theta;
    }
    if theta == 0.0 {
        // moment continuation: only the Delta = 0 slope is defined
        return sigma_sq;
    }
    gamma_one_minus_re(theta, sigma_sq, u) / (2.0 * u)
}

/// Gamma-averaged q(x).
pub fn q_avg_pump(x: f64, theta: f64, sigma_sq: f64, delta: f64) -> Result<f64> {
    if theta == 0.0 && sigma_sq > 0.0 {
        return domain("gamma-averaged q needs theta > 0");
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok((x * i_one_pump(theta, sigma_sq, x, delta)).clamp(0.0, 1.0))
}

fn dq_pump(x: f64, theta: f64, sigma_sq: f64, delta: f64) -> f64 {
    if sigma_sq == 0.0 {
        return dq_sharp(x, theta, delta);
    }
    let d2 = delta * delta;
    let u = x + d2;
    if x == 0.0 {
        return i_one_pump(theta, sigma_sq, 0.0, delta);
    }
    let k = theta * theta / sigma_sq;
    let c = 4.0 * sigma_sq * sigma_sq / (theta * theta);
    let (a, b) = gamma_phase(theta, sigma_sq, u);
    let da = -0.5 * k * c / (1.0 + c * u);
    let db = k * sigma_sq / (theta * u.sqrt() * (1.0 + c * u));
    let e = a.exp();
    let omr = gamma_one_minus_re(theta, sigma_sq, u);
    d2 / (2.0 * u * u) * omr - x / (2.0 * u) * e * (da * b.cos() - db * b.sin())
}

/// I2 = <xi^2 sin(2 xi D)/(2 xi D)> over the gamma density.
pub fn i_two(theta: f64, sigma_sq: f64, delta: f64) -> f64 {
    let m2 = theta * theta + sigma_sq;
    if delta == 0.0 {
        return m2;
    }
    if sigma_sq == 0.0 {
        return theta * theta * sinc(2.0 * theta * delta);
    }
    // <xi e^{i t xi}> = (k/beta)(1 - i t/beta)^{-(k+1)}, t = 2D
    let k = theta * theta / sigma_sq;
    let beta = theta / sigma_sq;
    let t = 2.0 * delta;
    let r = t / beta;
    let modulus = (-(k + 1.0) * 0.5 * (r * r).ln_1p()).exp();
    let arg = (k + 1.0) * r.atan();
    theta * modulus * arg.sin() / t
}

/// Gamma moments <xi^n> with mean theta and variance sigma^2.
pub fn gamma_moment(theta: f64, sigma_sq: f64, n: u32) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if theta == 0.0 {
        return if n == 2 { sigma_sq } else if n == 1 { 0.0 } else { f64::INFINITY };
    }
    let mut m = theta;
    for j in 1..n {
        m *= theta + j as f64 * sigma_sq / theta;
    }
    m
}

/// Gaussian-detuning average split into non-oscillating and oscillating parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningParts {
    pub total: f64,
    pub q0: f64,
    pub q_osc: f64,
}

fn gauss_density(xi: f64, delta: f64, sigma_sq: f64) -> f64 {
    let d = xi - delta;
    (-d * d / (2.0 * sigma_sq)).exp() / (2.0 * PI * sigma_sq).sqrt()
}

/// Gaussian average of a pair of integrands, Gauss-Hermite first, then adaptive
/// Gauss-Kronrod panels when the Hermite sequence does not settle.
fn gaussian_average2<F, G>(
    f: F,
    g: G,
    delta: f64,
    sigma_sq: f64,
    theta: f64,
    scales: &[f64],
    tol: f64,
    context: &str,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let sigma = sigma_sq.sqrt();
    let mut prev: Option<(f64, f64)> = None;
    for n in [64usize, 128, 256] {
        let rule = quad::gauss_hermite(n);
        let (mut sf, mut sg) = (0.0, 0.0);
        for (t, w) in rule.x.iter().zip(&rule.w) {
            let xi = delta + std::f64::consts::SQRT_2 * sigma * t;
            sf += w * f(xi);
            sg += w * g(xi);
        }
        let cur = (sf / PI.sqrt(), sg / PI.sqrt());
        if let Some(p) = prev {
            if (cur.0 - p.0).abs() < tol && (cur.1 - p.1).abs() < tol {
                return Ok(cur);
            }
        }
        prev = Some(cur);
    }
    // fallback: panels over delta +- 8.5 sigma
    let lo = delta - 8.5 * sigma;
    let hi = delta + 8.5 * sigma;
    let mut breaks = vec![0.0];
    for s in scales {
        for m in [0.25, 1.0, 4.0] {
            breaks.push(m * s);
            breaks.push(-m * s);
        }
    }
    let smooth_breaks = breaks.clone();
    if theta > 0.0 {
        let h = PI / theta;
        let count = ((hi - lo) / h).ceil() as usize;
        if count > 200_000 {
            return Err(MaserError::Quadrature {
                context: format!("{context}: oscillation too fast for panel quadrature"),
                achieved: f64::INFINITY,
                requested: tol,
            });
        }
        breaks.extend((1..count).map(|i| lo + i as f64 * h));
    }
    let wf = |xi: f64| gauss_density(xi, delta, sigma_sq) * f(xi);
    let wg = |xi: f64| gauss_density(xi, delta, sigma_sq) * g(xi);
    let vf = quad::integrate(&wf, lo, hi, &smooth_breaks, tol, context)?;
    let vg = quad::adaptive(&wg, lo, hi, &breaks, tol, breaks.len() + 20_000).map_err(
        |achieved| MaserError::Quadrature {
            context: context.to_string(),
            achieved,
            requested: tol,
        },
    )?;
    Ok((vf, vg))
}

/// Gaussian-detuning averaged q(x) with its q0 / q_osc split.
pub fn q_avg_detuning(
    x: f64,
    theta: f64,
    delta: f64,
    sigma_sq: f64,
    tol: f64,
) -> Result<DetuningParts> {
    if sigma_sq <= 0.0 {
        if sigma_sq < 0.0 {
            return domain("sigma_sq must be >= 0");
        }
        let q = q_sharp(x, theta, delta);
        let u = x + delta * delta;
        let q0 = if x > 0.0 { x / (2.0 * u) } else { 0.0 };
        return Ok(DetuningParts {
            total: q,
            q0,
            q_osc: q - q0,
        });
    }
    if x <= 0.0 {
        return Ok(DetuningParts {
            total: 0.0,
            q0: 0.0,
            q_osc: 0.0,
        });
    }
    let f0 = |xi: f64| x / (2.0 * (x + xi * xi));
    let fo = |xi: f64| {
        let u = x + xi * xi;
        -x * (2.0 * theta * u.sqrt()).cos() / (2.0 * u)
    };
    let (q0, q_osc) = gaussian_average2(
        f0,
        fo,
        delta,
        sigma_sq,
        theta,
        &[x.sqrt()],
        tol,
        "detuning average of q",
    )?;
    Ok(DetuningParts {
        total: (q0 + q_osc).clamp(0.0, 1.0),
        q0,
        q_osc,
    })
}

/// J1(theta) = <sin^2(theta xi)/xi^2> over the Gaussian detuning density.
pub fn j_one(theta: f64, delta: f64, sigma_sq: f64, tol: f64) -> Result<f64> {
    if sigma_sq == 0.0 {
        return Ok(sin2_over_u(theta, delta * delta));
    }
    let f = |xi: f64| sin2_over_u(theta, xi * xi);
    let (v, _) = gaussian_average2(f, |_| 0.0, delta, sigma_sq, theta, &[], tol, "J1")?;
    Ok(v)
}

impl PumpKernel {
    pub fn new(params: MaserParams, noise: NoiseSpec, mode: KernelMode, quad_tol: f64) -> Result<Self> {
        if mode == KernelMode::Averaged && noise.kind == NoiseKind::PumpGamma && params.theta == 0.0 && noise.sigma_sq > 0.0 {
            return domain("pump_gamma noise requires theta > 0");
        }
        Ok(PumpKernel {
            params,
            noise,
            mode,
            quad_tol,
        })
    }

    pub fn averaged(cfg: &ValidatedConfig) -> Self {
        PumpKernel {
            params: cfg.params,
            noise: cfg.noise,
            mode: KernelMode::Averaged,
            quad_tol: cfg.numerics.quad_tol,
        }
    }

    pub fn sharp(cfg: &ValidatedConfig) -> Self {
        PumpKernel {
            mode: KernelMode::Sharp,
            ..Self::averaged(cfg)
        }
    }

    /// Noise actually seen by this kernel.
    pub fn effective_noise(&self) -> NoiseSpec {
        match self.mode {
            KernelMode::Sharp => NoiseSpec::NONE,
            KernelMode::Averaged if self.noise.sigma_sq == 0.0 => NoiseSpec::NONE,
            KernelMode::Averaged => self.noise,
        }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        PumpKernel {
            params: self.params.with_theta(theta),
            ..*self
        }
    }

    pub fn with_a(&self, a: f64) -> Self {
        PumpKernel {
            params: self.params.with_a(a),
            ..*self
        }
    }

    /// Whether evaluation needs numerical quadrature.
    pub fn is_quadrature(&self) -> bool {
        self.effective_noise().kind == NoiseKind::DetuningGaussian
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let p = &self.params;
        let nz = self.effective_noise();
        match nz.kind {
            NoiseKind::None => Ok(q_sharp(x, p.theta, p.delta)),
            NoiseKind::PumpGamma => q_avg_pump(x, p.theta, nz.sigma_sq, p.delta),
            NoiseKind::DetuningGaussian => {
                Ok(q_avg_detuning(x, p.theta, p.delta, nz.sigma_sq, self.quad_tol)?.total)
            }
        }
    }

    /// <q(x)>/x, with the analytic limit at x = 0.
    pub fn q_over_x(&self, x: f64) -> Result<f64> {
        let p = &self.params;
        let nz = self.effective_noise();
        match nz.kind {
            NoiseKind::None => Ok(sin2_over_u(p.theta, x + p.delta * p.delta)),
            NoiseKind::PumpGamma => Ok(i_one_pump(p.theta, nz.sigma_sq, x, p.delta)),
            NoiseKind::DetuningGaussian => {
                if x < 1e-12 {
                    self.theta_eff_sq()
                } else {
                    Ok(self.evaluate(x)? / x)
                }
            }
        }
    }

    /// d<q>/dx: analytic for closed-form kernels, centered difference otherwise.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let p = &self.params;
        let nz = self.effective_noise();
        match nz.kind {
            NoiseKind::None => Ok(dq_sharp(x, p.theta, p.delta)),
            NoiseKind::PumpGamma => Ok(dq_pump(x, p.theta, nz.sigma_sq, p.delta)),
            NoiseKind::DetuningGaussian => {
                let h = 1e-6 * x.max(1.0);
                if x >= h {
                    Ok((self.evaluate(x + h)? - self.evaluate(x - h)?) / (2.0 * h))
                } else {
                    Ok((self.evaluate(x + h)? - self.evaluate(x)?) / h)
                }
            }
        }
    }

    /// theta_eff^2 = lim_{x->0} <q>/x.
    pub fn theta_eff_sq(&self) -> Result<f64> {
        let p = &self.params;
        let nz = self.effective_noise();
        match nz.kind {
            NoiseKind::None => Ok(sin2_over_u(p.theta, p.delta * p.delta)),
            NoiseKind::PumpGamma => Ok(i_one_pump(p.theta, nz.sigma_sq, 0.0, p.delta)),
            NoiseKind::DetuningGaussian => j_one(p.theta, p.delta, nz.sigma_sq, self.quad_tol),
        }
    }

    /// q at x = n/N for n = 0..=n_hi.
    pub fn table(&self, n_lo: usize, n_hi: usize) -> Result<Vec<f64>> {
        let nn = self.params.n_atoms;
        if self.is_quadrature() {
            (n_lo..=n_hi)
                .into_par_iter()
                .map(|n| self.evaluate(n as f64 / nn))
                .collect()
        } else {
            (n_lo..=n_hi).map(|n| self.evaluate(n as f64 / nn)).collect()
        }
    }
}
