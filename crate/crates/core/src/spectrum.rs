//! Generator of the photon birth-death chain, its spectral gap and the
//! correlation length.

use crate::error::{MaserError, Result};
use crate::kernel::PumpKernel;
use crate::model::NumericControls;
use crate::potential;
use crate::steady_state::{stationary_distribution, PhotonDistribution};
use crate::tridiag::{kth_eigenvalue, Tridiagonal};

/// N * barrier beyond which exp(-N barrier) is below double precision.
pub const UNDERFLOW_EXPONENT: f64 = 700.0;

/// L = L_C - N(M - 1) in band form, so that dp/dt = -gamma L p.
#[derive(Debug, Clone)]
pub struct Generator {
    pub bands: Tridiagonal,
    /// Upward rate n -> n+1, zero at n_max (reflecting truncation).
    pub birth: Vec<f64>,
    /// Downward rate n -> n-1, zero at n = 0.
    pub death: Vec<f64>,
    /// Null vector of L.
    pub stationary: PhotonDistribution,
    pub kernel: PumpKernel,
}

impl Generator {
    pub fn n_max(&self) -> usize {
        self.birth.len() - 1
    }

    /// ||L p||_inf over the largest band magnitude.
    pub fn null_residual(&self) -> f64 {
        let r = self.bands.apply(&self.stationary.probs);
        let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rn / self.bands.norm_inf()
    }

    /// Detailed-balance symmetric form D^{-1/2} L D^{1/2}: (diag, off).
    /// Both off-diagonal entries are formed from the stored log ratios and
    /// checked against each other, which re-verifies the recurrence.
    pub fn symmetrized(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.n_max();
        let lr = &self.stationary.log_ratios;
        let mut off = Vec::with_capacity(m);
        for n in 0..m {
            let (b, d) = (self.birth[n], self.death[n + 1]);
            if b == 0.0 {
                off.push(0.0);
                continue;
            }
            let upper = -d * (0.5 * lr[n]).exp();
            let lower = -b * (-0.5 * lr[n]).exp();
            let scale = upper.abs().max(lower.abs());
            if (upper - lower).abs() > 1e-10 * scale {
                return Err(MaserError::Spectrum(format!(
                    "symmetrized generator not symmetric at n = {n}: {upper} vs {lower}"
                )));
            }
            off.push(-(b * d).sqrt());
        }
        Ok((self.bands.diag.clone(), off))
    }
}

/// Builds the generator on the truncation chosen by the stationary solver.
pub fn build_generator(kernel: &PumpKernel, numerics: &NumericControls) -> Result<Generator> {
    let p = kernel.params;
    let dist = stationary_distribution(&p, kernel, numerics)?;
    let m = dist.n_max;
    let q = &dist.q;
    let nn = p.n_atoms;
    let birth: Vec<f64> = (0..=m)
        .map(|n| {
            if n == m {
                0.0
            } else {
                p.n_b * (n + 1) as f64 + nn * p.a * q[n + 1]
            }
        })
        .collect();
    let death: Vec<f64> = (0..=m)
        .map(|n| (1.0 + p.n_b) * n as f64 + nn * p.b() * q[n])
        .collect();
    let bands = Tridiagonal {
        sub: (0..m).map(|n| -birth[n]).collect(),
        diag: (0..=m).map(|n| birth[n] + death[n]).collect(),
        sup: (1..=m).map(|n| -death[n]).collect(),
    };
    Ok(Generator {
        bands,
        birth,
        death,
        stationary: dist,
        kernel: *kernel,
    })
}

/// Upper bidiagonal R with R^T R equal to the edge-flux matrix
/// K[k][k] = birth(k) + death(k+1), K[k][k+1] = -sqrt(death(k+1) birth(k+1)),
/// whose spectrum is that of L without the zero eigenvalue. Built by Givens
/// rotations from the bidiagonal square-root factor, using only products and
/// hypot, so tiny eigenvalues keep their relative accuracy.
fn flux_factor(birth: &[f64], death: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = birth.len() - 1;
    let mut r = Vec::with_capacity(m);
    let mut e = Vec::with_capacity(m.saturating_sub(1));
    let mut alpha = birth[0].sqrt();
    for k in 0..m {
        let beta = death[k + 1].sqrt();
        let rk = alpha.hypot(beta);
        r.push(rk);
        if k + 1 < m {
            let next = birth[k + 1].sqrt();
            e.push(-beta * next / rk);
            alpha = alpha * next / rk;
        }
    }
    (r, e)
}

/// Applies (R^T R)^{-1}; for nonnegative input every step is an addition.
fn flux_solve(r: &[f64], e: &[f64], x: &[f64]) -> Vec<f64> {
    let m = r.len();
    let mut z = vec![0.0; m];
    for k in 0..m {
        let carry = if k > 0 { e[k - 1] * z[k - 1] } else { 0.0 };
        z[k] = (x[k] - carry) / r[k];
    }
    for k in (0..m).rev() {
        let carry = if k + 1 < m { e[k] * z[k + 1] } else { 0.0 };
        z[k] = (z[k] - carry) / r[k];
    }
    z
}

/// Smallest nonzero eigenvalue of L.
///
/// Sturm bisection on the symmetric flux matrix gives the gap to absolute
/// precision; when that is not enough to fix it relatively, inverse iteration
/// with the cancellation-free factor refines it.
pub fn spectral_gap(gen: &Generator) -> Result<f64> {
    gen.symmetrized()?;
    let m = gen.n_max();
    if m == 0 {
        return Err(MaserError::Spectrum("truncation keeps a single level".into()));
    }
    let (b, d) = (&gen.birth, &gen.death);
    let diag: Vec<f64> = (0..m).map(|k| b[k] + d[k + 1]).collect();
    let off: Vec<f64> = (0..m.saturating_sub(1))
        .map(|k| -(d[k + 1] * b[k + 1]).sqrt())
        .collect();
    let lam_b = kth_eigenvalue(&diag, &off, 0);
    let norm = diag
        .iter()
        .enumerate()
        .map(|(i, v)| v + if i > 0 { off[i - 1].abs() } else { 0.0 } + off.get(i).map_or(0.0, |o| o.abs()))
        .fold(0.0, f64::max);
    if lam_b > 1e-6 * norm {
        if lam_b <= 0.0 {
            return Err(MaserError::Spectrum(format!("nonpositive gap {lam_b}")));
        }
        return Ok(lam_b);
    }
    let (r, e) = flux_factor(b, d);
    if r.iter().any(|v| !(*v > 0.0)) {
        return Err(MaserError::Spectrum("flux factor has a zero pivot".into()));
    }
    let mut x = vec![1.0; m];
    let mut lam = f64::NAN;
    let mut converged = false;
    for _ in 0..500 {
        let y = flux_solve(&r, &e, &x);
        let ny = y.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let nx = x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let next = nx / ny;
        x = y.iter().map(|v| v / ny).collect();
        if (next - lam).abs() <= 1e-15 * next {
            lam = next;
            converged = true;
            break;
        }
        lam = next;
    }
    if !converged && lam_b > 0.0 {
        return Ok(lam_b);
    }
    if !(lam > 0.0) || !lam.is_finite() {
        return Err(MaserError::Spectrum(format!("inverse iteration failed, bisection gave {lam_b}")));
    }
    Ok(lam)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    /// Spectral gap in units of gamma.
    pub lambda: f64,
    /// gamma xi = 1/lambda.
    pub xi: f64,
    /// Barrier between the two lowest minima of V0, if there are two.
    pub barrier: Option<f64>,
    /// exp(N barrier).
    pub barrier_estimate: Option<f64>,
    /// Set when N barrier exceeds the double-precision range of exp(-N barrier).
    pub underflow: bool,
}

impl CorrelationResult {
    /// Atom correlation length; the same gap governs the cavity.
    pub fn xi_atom(&self) -> f64 {
        self.xi
    }

    pub fn xi_cavity(&self) -> f64 {
        self.xi
    }
}

/// Correlation length from the gap plus the barrier-law estimate.
pub fn correlation_length(gen: &Generator, numerics: &NumericControls) -> Result<CorrelationResult> {
    let lambda = spectral_gap(gen)?;
    let report = potential::find_saddles(&gen.kernel, numerics)?;
    let nn = gen.kernel.params.n_atoms;
    let barrier = report.barrier;
    Ok(CorrelationResult {
        lambda,
        xi: 1.0 / lambda,
        barrier,
        barrier_estimate: barrier.map(|b| (nn * b).exp()),
        underflow: barrier.is_some_and(|b| nn * b > UNDERFLOW_EXPONENT),
    })
}
