//! Tridiagonal helpers: Thomas solve, products, Sturm counts.

use crate::error::{MaserError, Result};

/// Tridiagonal matrix; `sub[i]` is A[i+1][i], `sup[i]` is A[i][i+1].
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.sub[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.sup[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Column sums.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j];
                if j > 0 {
                    s += self.sup[j - 1];
                }
                if j + 1 < n {
                    s += self.sub[j];
                }
                s
            })
            .collect()
    }

    /// Thomas algorithm without pivoting; suited to diagonally dominant systems.
    pub fn solve_unchecked(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0];
        if piv == 0.0 {
            return Err(MaserError::Solve("zero pivot at row 0".into()));
        }
        c[0] = if n > 1 { self.sup[0] / piv } else { 0.0 };
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - self.sub[i - 1] * c[i - 1];
            if piv == 0.0 || !piv.is_finite() {
                return Err(MaserError::Solve(format!("zero pivot at row {i}")));
            }
            if i + 1 < n {
                c[i] = self.sup[i] / piv;
            }
            d[i] = (rhs[i] - self.sub[i - 1] * d[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    /// Solve with one refinement step and a relative residual check.
    pub fn solve(&self, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
        let mut x = self.solve_unchecked(rhs)?;
        let scale = |x: &[f64]| {
            self.norm_inf() * x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
                + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let resid = |x: &[f64]| -> Vec<f64> {
            self.apply(x).iter().zip(rhs).map(|(a, b)| b - a).collect()
        };
        let r = resid(&x);
        let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let s = scale(&x);
        if s == 0.0 || rn <= rel_tol * s {
            return Ok(x);
        }
        let dx = self.solve_unchecked(&r)?;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        let rn = resid(&x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rn <= rel_tol * scale(&x) {
            Ok(x)
        } else {
            Err(MaserError::Solve(format!(
                "residual {:.3e} exceeds {:.1e} relative",
                rn / scale(&x),
                rel_tol
            )))
        }
    }
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal (diag, off).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        q = diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th smallest eigenvalue (0-based) of a symmetric tridiagonal by bisection.
pub fn kth_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
