//! Resolves a validated configuration from a JSON file plus flag overrides.

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use maserlab::model::validate_with;
use maserlab::{KernelMode, MaserParams, NMax, NoiseSpec, NumericControls, ValidatedConfig};
use std::path::PathBuf;

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub nb: Option<f64>,
    /// Atoms per cavity lifetime
    #[arg(long = "N")]
    pub n_atoms: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// none | pump_gamma:<sigma_sq> | detuning_gaussian:<sigma_sq>
    #[arg(long)]
    pub noise: Option<String>,
    /// Photon truncation, an integer or "auto"
    #[arg(long)]
    pub nmax: Option<String>,
}

/// Marks errors that should exit with the config status.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

pub fn parse_noise(s: &str) -> Result<NoiseSpec> {
    if s == "none" {
        return Ok(NoiseSpec::NONE);
    }
    let (kind, var) = s
        .split_once(':')
        .ok_or_else(|| config_err(format!("noise '{s}' is not kind:sigma_sq")))?;
    let v: f64 = var
        .parse()
        .map_err(|_| config_err(format!("noise variance '{var}' is not a number")))?;
    match kind {
        "pump_gamma" => Ok(NoiseSpec::pump_gamma(v)),
        "detuning_gaussian" => Ok(NoiseSpec::detuning_gaussian(v)),
        _ => Err(config_err(format!("unknown noise kind '{kind}'"))),
    }
}

pub fn parse_nmax(s: &str) -> Result<NMax> {
    if s == "auto" {
        return Ok(NMax::Auto);
    }
    match s.parse::<usize>() {
        Ok(m) if m >= 1 => Ok(NMax::Fixed(m)),
        _ => Err(config_err(format!("nmax '{s}' is not a positive integer or auto"))),
    }
}

pub fn parse_measure(s: &str) -> Result<KernelMode> {
    match s {
        "sharp" => Ok(KernelMode::Sharp),
        "averaged" => Ok(KernelMode::Averaged),
        _ => Err(config_err(format!("measure '{s}' is not sharp or averaged"))),
    }
}

/// Inclusive grid of `steps` points from `min:max:steps`.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!(config_err(format!("theta range '{s}' is not min:max:steps")));
    }
    let num = |t: &str| {
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| config_err(format!("'{t}' in theta range is not a number")))
    };
    let (lo, hi) = (num(parts[0])?, num(parts[1])?);
    let steps: usize = parts[2]
        .parse()
        .map_err(|_| config_err(format!("steps '{}' is not an integer", parts[2])))?;
    if lo > hi || steps < 1 || lo < 0.0 {
        bail!(config_err(format!("theta range '{s}' needs 0 <= min <= max and steps >= 1")));
    }
    Ok(grid(lo, hi, steps))
}

pub fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (steps - 1) as f64;
    (0..steps)
        .map(|i| if i + 1 == steps { hi } else { lo + i as f64 * h })
        .collect()
}

/// Defaults are a = 1, n_b = 0.15, N = 35, theta = 0, delta = 0, no noise.
/// `theta_hint` replaces the default theta when neither file nor flag sets it,
/// so a sweep config validates at a point of its own grid.
pub fn resolve(args: &ConfigArgs, theta_hint: Option<f64>) -> Result<ValidatedConfig> {
    let (p, noise, numerics) = gather(args, theta_hint)?;
    validate_with(p, noise, numerics).map_err(|e| config_err(e.to_string()))
}

/// As [`resolve`], but theta = 0 is accepted: the critical line only needs
/// the noise moments there. Returns the config validated at theta = 1 and
/// the requested theta.
pub fn resolve_for_phase(args: &ConfigArgs) -> Result<(ValidatedConfig, f64)> {
    let (p, noise, numerics) = gather(args, None)?;
    let probe = if p.theta == 0.0 { p.with_theta(1.0) } else { p };
    let cfg = validate_with(probe, noise, numerics).map_err(|e| config_err(e.to_string()))?;
    Ok((cfg, p.theta))
}

fn gather(args: &ConfigArgs, theta_hint: Option<f64>) -> Result<(MaserParams, NoiseSpec, NumericControls)> {
    let base = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(|e| config_err(format!("{e:#}")))?;
            Some(ValidatedConfig::from_json(&text).map_err(|e| config_err(e.to_string()))?)
        }
        None => None,
    };
    let (mut p, mut noise, mut numerics) = match base {
        Some(c) => (c.params, c.noise, c.numerics),
        None => (
            MaserParams::new(1.0, 0.15, 35.0, theta_hint.unwrap_or(0.0), 0.0),
            NoiseSpec::NONE,
            NumericControls::default(),
        ),
    };
    if let Some(a) = args.a {
        p = p.with_a(a);
    }
    if let Some(v) = args.nb {
        p.n_b = v;
    }
    if let Some(v) = args.n_atoms {
        p.n_atoms = v;
    }
    if let Some(v) = args.theta {
        p.theta = v;
    }
    if let Some(v) = args.delta {
        p.delta = v;
    }
    if let Some(s) = &args.noise {
        noise = parse_noise(s)?;
    }
    if let Some(s) = &args.nmax {
        numerics.n_max = parse_nmax(s)?;
    }
    Ok((p, noise, numerics))
}
