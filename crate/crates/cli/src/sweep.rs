//! Theta sweeps: one CSV row per grid point, computed in parallel and written
//! in grid order. A failing point fills the `error` column and leaves the
//! value cells empty.

use anyhow::{bail, Result};
use maserlab::csvfmt::num;
use maserlab::observables::asymptotic_joint;
use maserlab::phase::{critical_line_detuning, critical_line_pump, Regime};
use maserlab::potential::{asymptotic_min, detuning_wide_noise_root, find_saddles, v0};
use maserlab::{
    build_generator, correlation_length, p_joint_all, p_plus_resummed, stationary_distribution, KernelMode,
    NoiseKind, PumpKernel, ResumMode, ValidatedConfig,
};
use rayon::prelude::*;
use std::io::Write;

use crate::config::config_err;

/// Explicit Fourier terms in the peaked and exact resummations.
pub const PEAKED_TERMS: usize = 3;
pub const EXACT_TERMS: usize = 256;

/// Largest theta of a sweep beyond which the large-theta potential is
/// reported alongside the rows.
pub const ASYMPTOTIC_THETA: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    PPlus,
    PJointPp,
    XBar,
    Corr,
    V0,
    Saddles,
    CriticalLine,
    Resummed,
}

impl Output {
    pub fn parse(s: &str) -> Result<Output> {
        Ok(match s {
            "p_plus" => Output::PPlus,
            "p_joint_pp" => Output::PJointPp,
            "x_bar" => Output::XBar,
            "corr" => Output::Corr,
            "v0" => Output::V0,
            "saddles" => Output::Saddles,
            "critical_line" => Output::CriticalLine,
            "resummed" => Output::Resummed,
            _ => bail!(config_err(format!("unknown output '{s}'"))),
        })
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Output::PPlus => &["p_plus"],
            Output::PJointPp => &["p_joint_pp"],
            Output::XBar => &["x_bar", "sigma_x"],
            Output::Corr => &["lambda", "log_gamma_xi", "barrier_estimate"],
            Output::V0 => &["v0_at_x_bar"],
            Output::Saddles => &["n_minima", "x_global_min", "barrier"],
            Output::CriticalLine => &["a_crit"],
            Output::Resummed => &["p_plus_peaked", "p_plus_exact"],
        }
    }

    fn needs_distribution(self) -> bool {
        matches!(self, Output::PPlus | Output::PJointPp | Output::XBar | Output::V0 | Output::Resummed)
    }
}

/// Comma-separated output list, deduplicated in first-seen order.
pub fn parse_outputs(s: &str) -> Result<Vec<Output>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let o = Output::parse(part)?;
        if !out.contains(&o) {
            out.push(o);
        }
    }
    if out.is_empty() {
        bail!(config_err("no outputs requested"));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepRequest {
    pub config: ValidatedConfig,
    pub thetas: Vec<f64>,
    pub outputs: Vec<Output>,
    /// Kernel used to read out atom excitation; the field always sees the
    /// averaged kernel.
    pub measure: KernelMode,
}

/// Values of one grid point; `None` cells are written empty.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub theta: f64,
    pub cells: std::result::Result<Vec<Option<f64>>, String>,
}

fn at_theta(cfg: &ValidatedConfig, theta: f64) -> maserlab::Result<ValidatedConfig> {
    ValidatedConfig {
        params: cfg.params.with_theta(theta),
        ..*cfg
    }
    .revalidate()
}

pub fn critical_a(cfg: &ValidatedConfig) -> maserlab::Result<f64> {
    let p = &cfg.params;
    let n = &cfg.noise;
    match n.kind {
        NoiseKind::None => critical_line_pump(p.theta, 0.0, p.delta, Regime::General),
        NoiseKind::PumpGamma => critical_line_pump(p.theta, n.sigma_sq, p.delta, Regime::General),
        NoiseKind::DetuningGaussian => {
            critical_line_detuning(p.theta, p.delta, n.sigma_sq, Regime::General, cfg.numerics.quad_tol)
        }
    }
}

fn record(req: &SweepRequest, theta: f64) -> maserlab::Result<Vec<Option<f64>>> {
    let cfg = at_theta(&req.config, theta)?;
    let p = cfg.params;
    let avg = PumpKernel::averaged(&cfg);
    let meas = match req.measure {
        KernelMode::Sharp => PumpKernel::sharp(&cfg),
        KernelMode::Averaged => avg,
    };
    let dist = if req.outputs.iter().any(|o| o.needs_distribution()) {
        Some(stationary_distribution(&p, &avg, &cfg.numerics)?)
    } else {
        None
    };
    let mut cells = Vec::new();
    for o in &req.outputs {
        match o {
            Output::PPlus | Output::PJointPp => {
                let j = p_joint_all(dist.as_ref().unwrap(), &meas)?;
                cells.push(Some(if *o == Output::PPlus { j.p_plus } else { j.pp }));
            }
            Output::XBar => {
                let d = dist.as_ref().unwrap();
                cells.push(Some(d.order_parameter()));
                cells.push(Some(d.std_x()));
            }
            Output::Corr => {
                let g = build_generator(&avg, &cfg.numerics)?;
                let c = correlation_length(&g, &cfg.numerics)?;
                cells.push(Some(c.lambda));
                cells.push(Some(c.xi.ln()));
                cells.push(if c.underflow { None } else { c.barrier_estimate });
            }
            Output::V0 => cells.push(Some(v0(&avg, dist.as_ref().unwrap().order_parameter())?)),
            Output::Saddles => {
                let r = find_saddles(&avg, &cfg.numerics)?;
                cells.push(Some(r.minima().count() as f64));
                cells.push(r.global_min.map(|i| r.saddles[i].x));
                cells.push(r.barrier);
            }
            Output::CriticalLine => cells.push(Some(critical_a(&cfg)?)),
            Output::Resummed => {
                let d = dist.as_ref().unwrap();
                cells.push(Some(p_plus_resummed(d, &p, PEAKED_TERMS, ResumMode::Peaked)?.p_plus));
                cells.push(Some(p_plus_resummed(d, &p, EXACT_TERMS, ResumMode::Exact)?.p_plus));
            }
        }
    }
    Ok(cells)
}

/// Evaluates every grid point on the current rayon pool; order follows the grid.
pub fn run_sweep(req: &SweepRequest) -> Vec<SweepRecord> {
    req.thetas
        .par_iter()
        .map(|&theta| SweepRecord {
            theta,
            cells: record(req, theta).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Error text with separators replaced so the cell stays one CSV field.
pub fn clean(msg: &str) -> String {
    msg.replace([',', '\n', '\r'], ";")
}

pub fn write_csv<W: Write>(mut w: W, req: &SweepRequest, rows: &[SweepRecord]) -> std::io::Result<()> {
    let mut header = vec!["theta"];
    for o in &req.outputs {
        header.extend_from_slice(o.columns());
    }
    header.push("error");
    writeln!(w, "{}", header.join(","))?;
    let width: usize = req.outputs.iter().map(|o| o.columns().len()).sum();
    for r in rows {
        let mut line = vec![num(r.theta)];
        match &r.cells {
            Ok(c) => {
                line.extend(c.iter().map(|v| v.map(num).unwrap_or_default()));
                line.push(String::new());
            }
            Err(e) => {
                line.extend(std::iter::repeat_n(String::new(), width));
                line.push(clean(e));
            }
        }
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Large-theta estimates for the swept config, if the sweep reaches them.
pub fn summary(req: &SweepRequest) -> Option<String> {
    let cfg = &req.config;
    let top = req.thetas.last().copied()?;
    if top < ASYMPTOTIC_THETA || cfg.params.a <= 0.5 {
        return None;
    }
    if cfg.noise.kind == NoiseKind::DetuningGaussian {
        return detuning_wide_noise_root(cfg.params.a, cfg.noise.sigma_sq)
            .ok()
            .map(|x| format!("wide detuning noise: large-theta x_bar near {}", num(x)));
    }
    match asymptotic_min(&cfg.params, &cfg.noise, cfg.numerics.root_tol) {
        Ok(m) => Some(format!(
            "asymptotic: x_inf={} P_inf(+)={} P_inf(+,+)={}",
            num(m.xbar),
            num(m.p_plus),
            num(asymptotic_joint(m.p_plus))
        )),
        Err(e) => Some(format!("asymptotic: unavailable ({e})")),
    }
}
