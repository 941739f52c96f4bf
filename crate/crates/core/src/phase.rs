//! Thermal-maser critical lines and the order of the transition.

use crate::csvfmt;
use crate::error::{domain, MaserError, Result};
use crate::kernel::{gamma_moment, i_one_pump, i_two, j_one};
use crate::model::{NoiseKind, NoiseSpec};
use std::io::Write;

/// How a critical value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Full slope integral at x = 0.
    General,
    /// Delta = 0 closed form 1/2 + 1/(2(sigma^2 + theta^2)).
    DeltaZero,
    /// Narrow-noise expansion around the mean.
    Peaked,
    /// Wide-noise limit 1/2 + Delta^2.
    Broad,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::General => "general",
            Regime::DeltaZero => "delta_zero",
            Regime::Peaked => "peaked",
            Regime::Broad => "broad",
        }
    }
}

/// a_crit from the small-x slope of the averaged kernel.
fn from_slope(slope: f64) -> f64 {
    if slope > 0.0 {
        0.5 + 0.5 / slope
    } else {
        f64::INFINITY
    }
}

/// Critical pump probability under gamma pump noise. Values above 1 mean
/// there is no transition at this theta.
pub fn critical_line_pump(theta: f64, sigma_sq: f64, delta: f64, regime: Regime) -> Result<f64> {
    if sigma_sq < 0.0 || theta < 0.0 {
        return domain("critical line needs theta >= 0 and sigma_sq >= 0");
    }
    let d2 = delta * delta;
    Ok(match regime {
        Regime::General => from_slope(i_one_pump(theta, sigma_sq, 0.0, delta)),
        Regime::DeltaZero => {
            if delta != 0.0 {
                return domain("delta_zero regime requires delta = 0");
            }
            from_slope(sigma_sq + theta * theta)
        }
        Regime::Peaked => {
            if delta == 0.0 {
                from_slope(sigma_sq + theta * theta)
            } else {
                let td = theta * delta;
                let den = td.sin().powi(2) + sigma_sq * d2 * (2.0 * td).cos();
                if den > 0.0 {
                    0.5 + 0.5 * d2 / den
                } else {
                    f64::INFINITY
                }
            }
        }
        Regime::Broad => {
            if delta == 0.0 {
                return domain("broad regime is undefined at delta = 0");
            }
            0.5 + d2
        }
    })
}

/// 3 sin^2(theta D)/D^2 + theta^2 cos(2 theta D) - 2 theta sin(2 theta D)/D,
/// equal to D^2 times half the second derivative of sin^2(theta xi)/xi^2 at xi = D.
pub fn peaked_detuning_g(theta: f64, delta: f64) -> f64 {
    let td = theta * delta;
    if delta == 0.0 {
        // 3 theta^2 + theta^2 - 4 theta^2 cancels at this order
        return 0.0;
    }
    3.0 * td.sin().powi(2) / (delta * delta) + theta * theta * (2.0 * td).cos()
        - 2.0 * theta * (2.0 * td).sin() / delta
}

/// Critical pump probability under Gaussian detuning noise.
pub fn critical_line_detuning(theta: f64, delta: f64, sigma_sq: f64, regime: Regime, tol: f64) -> Result<f64> {
    if sigma_sq < 0.0 || theta < 0.0 {
        return domain("critical line needs theta >= 0 and sigma_sq >= 0");
    }
    let d2 = delta * delta;
    match regime {
        Regime::General => Ok(from_slope(j_one(theta, delta, sigma_sq, tol)?)),
        Regime::DeltaZero => {
            if sigma_sq != 0.0 || delta != 0.0 {
                return domain("delta_zero regime requires delta = 0 and no detuning noise");
            }
            Ok(from_slope(theta * theta))
        }
        Regime::Peaked => {
            if delta == 0.0 {
                return domain("peaked detuning form needs delta != 0");
            }
            let den = (theta * delta).sin().powi(2) + sigma_sq * peaked_detuning_g(theta, delta);
            Ok(if den > 0.0 { 0.5 + 0.5 * d2 / den } else { f64::INFINITY })
        }
        Regime::Broad => {
            if delta == 0.0 {
                return domain("broad regime is undefined at delta = 0");
            }
            Ok(0.5 + d2)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalLine {
    pub thetas: Vec<f64>,
    pub a_crit: Vec<f64>,
    pub regime: Regime,
    pub noise: NoiseSpec,
    pub delta: f64,
}

impl CriticalLine {
    /// Whether a transition exists at grid index i (a_crit <= 1).
    pub fn has_transition(&self, i: usize) -> bool {
        self.a_crit[i] <= 1.0
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "theta,a_crit,regime")?;
        for (i, (t, a)) in self.thetas.iter().zip(&self.a_crit).enumerate() {
            let tag = if self.has_transition(i) {
                self.regime.name()
            } else {
                "no_transition"
            };
            writeln!(out, "{},{},{}", csvfmt::num(*t), csvfmt::num(*a), tag)?;
        }
        Ok(())
    }
}

/// Critical line over a theta grid for the given noise.
pub fn critical_line(noise: &NoiseSpec, delta: f64, thetas: &[f64], regime: Regime, tol: f64) -> Result<CriticalLine> {
    let a_crit = thetas
        .iter()
        .map(|&t| match noise.kind {
            NoiseKind::None => critical_line_pump(t, 0.0, delta, regime),
            NoiseKind::PumpGamma => critical_line_pump(t, noise.sigma_sq, delta, regime),
            NoiseKind::DetuningGaussian => critical_line_detuning(t, delta, noise.sigma_sq, regime, tol),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CriticalLine {
        thetas: thetas.to_vec(),
        a_crit,
        regime,
        noise: *noise,
        delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Second,
    Third,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionOrder {
    pub theta: f64,
    pub order: Order,
    /// d x-bar / d theta on the critical line.
    pub x1: f64,
    /// d^2 x-bar / d theta^2 on the critical line.
    pub x2: f64,
}

/// Values below this count as zero when classifying.
pub const ZERO_THRESHOLD: f64 = 1e-10;

fn classify(theta: f64, x1: f64, x2: f64) -> Result<TransitionOrder> {
    let order = if x1.abs() >= ZERO_THRESHOLD {
        Order::Second
    } else if x2.abs() >= ZERO_THRESHOLD {
        Order::Third
    } else {
        return Err(MaserError::Degenerate(format!(
            "x'={x1:.3e} and x''={x2:.3e} both vanish at theta = {theta}"
        )));
    };
    Ok(TransitionOrder { theta, order, x1, x2 })
}

/// Order from the noise moments at Delta = 0: x' = 6 theta/<xi^4> and
/// x'' = 6/<xi^4> [1 - 2 (theta/<xi^4>) d<xi^4>/dtheta + 7/12 (theta/<xi^4>)^2 <xi^6>].
pub fn transition_order_moments(theta: f64, m4: f64, dm4: f64, m6: f64) -> Result<TransitionOrder> {
    if !(m4 > 0.0) || !m4.is_finite() {
        let (x1, x2) = if m4.is_infinite() { (0.0, 0.0) } else { (f64::NAN, f64::NAN) };
        return classify(theta, x1, x2);
    }
    let r = theta / m4;
    let x1 = 6.0 * r;
    let x2 = 6.0 / m4 * (1.0 - 2.0 * r * dm4 + 7.0 / 12.0 * r * r * m6);
    classify(theta, x1, x2)
}

/// Centered first and second derivatives with one Richardson step.
fn richardson<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> (f64, f64) {
    let d1 = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let d2 = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    (
        (4.0 * d1(0.5 * h) - d1(h)) / 3.0,
        (4.0 * d2(0.5 * h) - d2(h)) / 3.0,
    )
}

/// Order of the gamma-noise transition at theta on the critical line.
pub fn transition_order(theta: f64, sigma_sq: f64, delta: f64) -> Result<TransitionOrder> {
    if theta < 0.0 || sigma_sq < 0.0 {
        return domain("transition order needs theta >= 0 and sigma_sq >= 0");
    }
    if delta == 0.0 {
        let m4 = gamma_moment(theta, sigma_sq, 4);
        let m6 = gamma_moment(theta, sigma_sq, 6);
        // <xi^4> = prod_{j=1..3} (theta^2 + j s^2) / theta^2
        let dm4 = if theta == 0.0 {
            f64::NAN
        } else {
            let dlog: f64 = (1..4)
                .map(|j| 2.0 * theta / (theta * theta + j as f64 * sigma_sq))
                .sum();
            m4 * (dlog - 2.0 / theta)
        };
        return transition_order_moments(theta, m4, dm4, m6);
    }
    if theta == 0.0 && sigma_sq > 0.0 {
        return Err(MaserError::Degenerate(
            "gamma density degenerates at theta = 0 with detuning".into(),
        ));
    }
    let d2 = delta * delta;
    let mut h = 1e-4 * theta.max(1.0);
    if sigma_sq > 0.0 {
        h = h.min(0.25 * theta);
    }
    let i1 = |t: f64| i_one_pump(t, sigma_sq, 0.0, delta);
    let i2 = |t: f64| i_two(t, sigma_sq, delta);
    let (di1, ddi1) = richardson(&i1, theta, h);
    let (di2, _) = richardson(&i2, theta, h);
    let den = i1(theta) - i2(theta);
    if den == 0.0 {
        return Err(MaserError::Degenerate(format!("I1 = I2 at theta = {theta}")));
    }
    let x1 = d2 * di1 / den;
    let x2 = (d2 * ddi1 + x1 * di2) / den;
    classify(theta, x1, x2)
}
