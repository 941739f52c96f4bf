//! Exact stationary photon distribution from the detailed-balance product.

use crate::csvfmt;
use crate::error::{MaserError, Result};
use crate::kernel::PumpKernel;
use crate::model::{MaserParams, NMax, NumericControls};
use std::io::Write;

/// Largest truncation the auto rule may reach.
pub const N_MAX_LIMIT: usize = 1 << 24;

#[derive(Debug, Clone)]
pub struct PhotonDistribution {
    /// p_0 ..= p_{n_max}, normalized.
    pub probs: Vec<f64>,
    pub n_max: usize,
    /// Geometric bound on the probability mass beyond n_max.
    pub tail_mass_bound: f64,
    pub n_atoms: f64,
    /// ln(p_{n+1}/p_n) for n = 0..n_max-1; -inf where the birth rate vanishes.
    pub log_ratios: Vec<f64>,
    /// Kernel values q_0 ..= q_{n_max+1} used to build the distribution.
    pub q: Vec<f64>,
    pub kernel: Option<PumpKernel>,
}

fn birth(p: &MaserParams, q: &[f64], n: usize) -> f64 {
    p.n_b * (n + 1) as f64 + p.n_atoms * p.a * q[n + 1]
}

fn death(p: &MaserParams, q: &[f64], n: usize) -> f64 {
    (1.0 + p.n_b) * n as f64 + p.n_atoms * p.b() * q[n]
}

fn log_ratio(p: &MaserParams, q: &[f64], n: usize) -> f64 {
    let bn = birth(p, q, n);
    if bn <= 0.0 {
        return f64::NEG_INFINITY;
    }
    bn.ln() - death(p, q, n + 1).ln()
}

fn normalize(log_p: &[f64]) -> Vec<f64> {
    let m = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = log_p.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = p.iter().sum();
    for v in &mut p {
        *v /= s;
    }
    p
}

fn tail_bound(p_last: f64, last_log_ratio: f64) -> f64 {
    if p_last == 0.0 {
        return 0.0;
    }
    let r = last_log_ratio.exp();
    if r < 1.0 {
        p_last * r / (1.0 - r)
    } else {
        f64::INFINITY
    }
}

/// Builds p_0..p_{n_max} from cumulative log-ratios. With `NMax::Auto` the
/// truncation starts at max(64, 4N) and doubles until the tail bound is met.
pub fn stationary_distribution(
    params: &MaserParams,
    kernel: &PumpKernel,
    numerics: &NumericControls,
) -> Result<PhotonDistribution> {
    let (mut n_max, auto) = match numerics.n_max {
        NMax::Fixed(m) => (m, false),
        NMax::Auto => (64usize.max((4.0 * params.n_atoms).ceil() as usize), true),
    };
    let mut q = kernel.table(0, n_max + 1)?;
    let mut log_p = vec![0.0];
    let mut log_ratios = Vec::with_capacity(n_max);
    loop {
        for n in log_ratios.len()..n_max {
            let l = log_ratio(params, &q, n);
            log_ratios.push(l);
            log_p.push(log_p[n] + l);
        }
        let probs = normalize(&log_p);
        let tail = tail_bound(probs[n_max], log_ratios[n_max - 1]);
        if !auto || tail < numerics.tail_tol {
            return Ok(PhotonDistribution {
                probs,
                n_max,
                tail_mass_bound: tail,
                n_atoms: params.n_atoms,
                log_ratios,
                q,
                kernel: Some(*kernel),
            });
        }
        if 2 * n_max > N_MAX_LIMIT {
            return Err(MaserError::Truncation(format!(
                "tail bound {tail:.3e} still above {:.3e} at n_max = {n_max}",
                numerics.tail_tol
            )));
        }
        let more = kernel.table(n_max + 2, 2 * n_max + 1)?;
        q.extend(more);
        n_max *= 2;
    }
}

/// Geometric distribution of the thermal phase with the small-x slope theta_eff^2.
pub fn thermal_distribution(
    params: &MaserParams,
    theta_eff_sq: f64,
    tail_tol: f64,
) -> Result<PhotonDistribution> {
    let a = params.a;
    if theta_eff_sq * (2.0 * a - 1.0) >= 1.0 {
        return Err(MaserError::NonNormalizable(format!(
            "theta_eff^2 (2a-1) = {} >= 1",
            theta_eff_sq * (2.0 * a - 1.0)
        )));
    }
    let r = (params.n_b + a * theta_eff_sq) / (1.0 + params.n_b + params.b() * theta_eff_sq);
    let n_max = if r <= 0.0 {
        1
    } else {
        ((tail_tol.ln() / r.ln()).ceil() as usize).max(1)
    };
    if n_max > N_MAX_LIMIT {
        return Err(MaserError::Truncation(format!("geometric ratio {r} too close to 1")));
    }
    let lr = r.ln();
    let log_p: Vec<f64> = (0..=n_max).map(|n| n as f64 * lr).collect();
    let mut probs = normalize(&log_p);
    if r <= 0.0 {
        probs = vec![0.0; n_max + 1];
        probs[0] = 1.0;
    }
    Ok(PhotonDistribution {
        tail_mass_bound: tail_bound(probs[n_max], lr),
        probs,
        n_max,
        n_atoms: params.n_atoms,
        log_ratios: vec![lr; n_max],
        q: Vec::new(),
        kernel: None,
    })
}

impl PhotonDistribution {
    /// x-bar = sum n p_n / N.
    pub fn order_parameter(&self) -> f64 {
        self.mean_n() / self.n_atoms
    }

    pub fn mean_n(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Standard deviation of x = n/N.
    pub fn std_x(&self) -> f64 {
        let m = self.mean_n();
        let v: f64 = self
            .probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - m).powi(2) * p)
            .sum();
        v.sqrt() / self.n_atoms
    }

    /// Continuous alias N p_{n} at n = Nx, linearly interpolated.
    pub fn continuous_alias(&self, x: f64) -> f64 {
        let t = x * self.n_atoms;
        if t < 0.0 || t > self.n_max as f64 {
            return 0.0;
        }
        let i = (t.floor() as usize).min(self.n_max);
        let f = t - i as f64;
        let hi = if i < self.n_max { self.probs[i + 1] } else { 0.0 };
        self.n_atoms * ((1.0 - f) * self.probs[i] + f * hi)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,p_n")?;
        for (n, p) in self.probs.iter().enumerate() {
            writeln!(w, "{},{}", n, csvfmt::num(*p))?;
        }
        Ok(())
    }
}

/// x-bar - (a + n_b/N - P(+)); vanishes up to tail mass when P(+) uses the
/// same kernel as the distribution.
pub fn sum_rule_residual(params: &MaserParams, dist: &PhotonDistribution, p_plus: f64) -> f64 {
    dist.order_parameter() - (params.a + params.n_b / params.n_atoms - p_plus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelMode;
    use crate::model::NoiseSpec;

    fn sharp(p: MaserParams) -> PumpKernel {
        PumpKernel::new(p, NoiseSpec::NONE, KernelMode::Sharp, 1e-10).unwrap()
    }

    #[test]
    fn theta_zero_is_thermal() {
        let p = MaserParams::new(0.7, 0.4, 20.0, 0.0, 0.0);
        let d = stationary_distribution(&p, &sharp(p), &NumericControls::default()).unwrap();
        let r: f64 = 0.4 / 1.4;
        for n in 0..20 {
            let want = (1.0 - r) * r.powi(n as i32);
            assert!((d.probs[n] - want).abs() < 1e-14);
        }
        assert!((d.order_parameter() - 0.4 / 20.0).abs() < 1e-14);
    }

    #[test]
    fn recurrence_holds() {
        let p = MaserParams::new(0.8, 0.1, 50.0, 7.0, 0.2);
        let k = sharp(p);
        let d = stationary_distribution(&p, &k, &NumericControls::default()).unwrap();
        assert!(d.tail_mass_bound <= 1e-12);
        let s: f64 = d.probs.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        for n in 1..=d.n_max {
            let lhs = death(&p, &d.q, n) * d.probs[n];
            let rhs = d.probs[n - 1] * (p.n_b * n as f64 + p.n_atoms * p.a * d.q[n]);
            if rhs > 1e-290 {
                assert!((lhs - rhs).abs() <= 1e-12 * rhs, "n={n}");
            }
        }
    }

    #[test]
    fn thermal_boundary() {
        let p = MaserParams::new(1.0, 0.15, 35.0, 0.0, 0.0);
        assert!(thermal_distribution(&p, 0.999, 1e-12).is_ok());
        assert!(matches!(
            thermal_distribution(&p, 1.001, 1e-12),
            Err(MaserError::NonNormalizable(_))
        ));
        let half = thermal_distribution(&p.with_a(0.5), 50.0, 1e-12).unwrap();
        let r = (0.15 + 25.0) / (1.15 + 25.0);
        assert!((half.probs[1] / half.probs[0] - r).abs() < 1e-14);
    }

    #[test]
    fn doubling_n_max_keeps_values() {
        let p = MaserParams::new(1.0, 0.15, 35.0, 12.0, 0.0);
        let k = sharp(p);
        let d1 = stationary_distribution(&p, &k, &NumericControls::default()).unwrap();
        let nc = NumericControls {
            n_max: NMax::Fixed(2 * d1.n_max),
            ..Default::default()
        };
        let d2 = stationary_distribution(&p, &k, &nc).unwrap();
        for n in 0..=d1.n_max {
            assert!((d1.probs[n] - d2.probs[n]).abs() <= 1e-12);
        }
    }

    #[test]
    fn alias_integrates_to_one() {
        let p = MaserParams::new(1.0, 0.15, 35.0, 12.0, 0.0);
        let d = stationary_distribution(&p, &sharp(p), &NumericControls::default()).unwrap();
        let h = 1.0 / p.n_atoms;
        // trapezoid on the grid equals the plain sum for a piecewise-linear alias
        let s: f64 = (0..=d.n_max).map(|n| d.continuous_alias(n as f64 * h) * h).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
