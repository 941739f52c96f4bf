//! Physical and numerical configuration shared by every other module.

use crate::error::{domain, MaserError, Result};
use serde::{Deserialize, Serialize};

/// Physical configuration of the maser. `b = 1 - a` is always derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaserParams {
    pub a: f64,
    pub n_b: f64,
    pub n_atoms: f64,
    pub theta: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl MaserParams {
    pub fn new(a: f64, n_b: f64, n_atoms: f64, theta: f64, delta: f64) -> Self {
        MaserParams {
            a,
            n_b,
            n_atoms,
            theta,
            delta,
            gamma: 1.0,
        }
    }

    pub fn b(&self) -> f64 {
        1.0 - self.a
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        MaserParams { theta, ..*self }
    }

    pub fn with_a(&self, a: f64) -> Self {
        MaserParams { a, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    None,
    PumpGamma,
    DetuningGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma_sq: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        kind: NoiseKind::None,
        sigma_sq: 0.0,
    };

    pub fn pump_gamma(sigma_sq: f64) -> Self {
        NoiseSpec {
            kind: NoiseKind::PumpGamma,
            sigma_sq,
        }
    }

    pub fn detuning_gaussian(sigma_sq: f64) -> Self {
        NoiseSpec {
            kind: NoiseKind::DetuningGaussian,
            sigma_sq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NMax {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericControls {
    pub n_max: NMax,
    pub quad_tol: f64,
    pub root_tol: f64,
    pub tail_tol: f64,
}

impl Default for NumericControls {
    fn default() -> Self {
        NumericControls {
            n_max: NMax::Auto,
            quad_tol: 1e-10,
            root_tol: 1e-12,
            tail_tol: 1e-12,
        }
    }
}

/// A parameter/noise pair that passed [`validate`], plus numerics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedConfig {
    pub params: MaserParams,
    pub noise: NoiseSpec,
    pub numerics: NumericControls,
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        domain(msg)
    }
}

/// Checks every bound and normalizes zero-variance noise to `None`.
pub fn validate(params: MaserParams, noise: NoiseSpec) -> Result<ValidatedConfig> {
    validate_with(params, noise, NumericControls::default())
}

pub fn validate_with(
    params: MaserParams,
    noise: NoiseSpec,
    numerics: NumericControls,
) -> Result<ValidatedConfig> {
    let p = params;
    check(p.a.is_finite() && (0.0..=1.0).contains(&p.a), "a must lie in [0, 1]")?;
    check(p.n_b.is_finite() && p.n_b >= 0.0, "n_b must be >= 0")?;
    check(p.n_atoms.is_finite() && p.n_atoms > 0.0, "N must be > 0")?;
    check(p.theta.is_finite() && p.theta >= 0.0, "theta must be >= 0")?;
    check(p.delta.is_finite(), "delta must be finite")?;
    check(p.gamma.is_finite() && p.gamma > 0.0, "gamma must be > 0")?;
    check(
        noise.sigma_sq.is_finite() && noise.sigma_sq >= 0.0,
        "sigma_sq must be >= 0",
    )?;
    let mut noise = noise;
    if noise.sigma_sq == 0.0 {
        noise = NoiseSpec::NONE;
    }
    if noise.kind == NoiseKind::None && noise.sigma_sq != 0.0 {
        return domain("noise kind none requires sigma_sq = 0");
    }
    if noise.kind == NoiseKind::PumpGamma && p.theta == 0.0 {
        return domain("pump_gamma noise requires theta > 0 (gamma shape degenerates at theta = 0)");
    }
    let n = numerics;
    check(
        n.quad_tol > 0.0 && n.root_tol > 0.0 && n.tail_tol > 0.0,
        "numeric tolerances must be > 0",
    )?;
    if let NMax::Fixed(m) = n.n_max {
        check(m >= 1, "n_max must be >= 1")?;
    }
    Ok(ValidatedConfig {
        params,
        noise,
        numerics,
    })
}

impl ValidatedConfig {
    pub fn revalidate(&self) -> Result<ValidatedConfig> {
        validate_with(self.params, self.noise, self.numerics)
    }
}

// JSON file layout.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    kind: String,
    #[serde(default)]
    sigma_sq: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum NMaxFile {
    Fixed(usize),
    Word(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NumericsFile {
    n_max: NMaxFile,
    quad_tol: f64,
    root_tol: f64,
    tail_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    a: f64,
    n_b: f64,
    #[serde(rename = "N")]
    n_atoms: f64,
    theta: f64,
    delta: f64,
    noise: NoiseFile,
    #[serde(default)]
    numerics: Option<NumericsFile>,
}

pub fn noise_kind_name(kind: NoiseKind) -> &'static str {
    match kind {
        NoiseKind::None => "none",
        NoiseKind::PumpGamma => "pump_gamma",
        NoiseKind::DetuningGaussian => "detuning_gaussian",
    }
}

pub fn parse_noise_kind(s: &str) -> Result<NoiseKind> {
    match s {
        "none" => Ok(NoiseKind::None),
        "pump_gamma" => Ok(NoiseKind::PumpGamma),
        "detuning_gaussian" => Ok(NoiseKind::DetuningGaussian),
        other => Err(MaserError::Config(format!("unknown noise kind '{other}'"))),
    }
}

impl ValidatedConfig {
    pub fn to_json(&self) -> String {
        let p = &self.params;
        let file = ConfigFile {
            a: p.a,
            n_b: p.n_b,
            n_atoms: p.n_atoms,
            theta: p.theta,
            delta: p.delta,
            noise: NoiseFile {
                kind: noise_kind_name(self.noise.kind).to_string(),
                sigma_sq: self.noise.sigma_sq,
            },
            numerics: Some(NumericsFile {
                n_max: match self.numerics.n_max {
                    NMax::Auto => NMaxFile::Word("auto".into()),
                    NMax::Fixed(m) => NMaxFile::Fixed(m),
                },
                quad_tol: self.numerics.quad_tol,
                root_tol: self.numerics.root_tol,
                tail_tol: self.numerics.tail_tol,
            }),
        };
        serde_json::to_string_pretty(&file).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<ValidatedConfig> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| MaserError::Config(e.to_string()))?;
        let kind = parse_noise_kind(&file.noise.kind)?;
        let numerics = match file.numerics {
            None => NumericControls::default(),
            Some(n) => NumericControls {
                n_max: match n.n_max {
                    NMaxFile::Fixed(m) => NMax::Fixed(m),
                    NMaxFile::Word(w) if w == "auto" => NMax::Auto,
                    NMaxFile::Word(w) => {
                        return Err(MaserError::Config(format!("bad n_max '{w}'")))
                    }
                },
                quad_tol: n.quad_tol,
                root_tol: n.root_tol,
                tail_tol: n.tail_tol,
            },
        };
        let params = MaserParams::new(file.a, file.n_b, file.n_atoms, file.theta, file.delta);
        validate_with(
            params,
            NoiseSpec {
                kind,
                sigma_sq: file.noise.sigma_sq,
            },
            numerics,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_fig1_config() {
        let p = MaserParams::new(1.0, 0.15, 35.0, 10.0, 0.0);
        assert!(validate(p, NoiseSpec::NONE).is_ok());
    }

    #[test]
    fn zero_variance_is_no_noise() {
        let p = MaserParams::new(0.5, 0.1, 10.0, 1.0, 0.0);
        let c = validate(p, NoiseSpec::pump_gamma(0.0)).unwrap();
        assert_eq!(c.noise.kind, NoiseKind::None);
    }

    #[test]
    fn gamma_noise_needs_positive_theta() {
        let p = MaserParams::new(0.5, 0.1, 10.0, 0.0, 0.0);
        assert!(matches!(
            validate(p, NoiseSpec::pump_gamma(1.0)),
            Err(MaserError::Domain(_))
        ));
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = [
            MaserParams::new(1.1, 0.1, 10.0, 1.0, 0.0),
            MaserParams::new(0.5, -0.1, 10.0, 1.0, 0.0),
            MaserParams::new(0.5, 0.1, 0.0, 1.0, 0.0),
            MaserParams::new(0.5, 0.1, 10.0, -1.0, 0.0),
        ];
        for p in bad {
            assert!(validate(p, NoiseSpec::NONE).is_err());
        }
    }

    #[test]
    fn json_keys_and_auto() {
        let text = r#"{"a":1,"n_b":0.15,"N":35,"theta":10,"delta":0,
            "noise":{"kind":"pump_gamma","sigma_sq":25},
            "numerics":{"n_max":"auto","quad_tol":1e-10,"root_tol":1e-12,"tail_tol":1e-12}}"#;
        let c = ValidatedConfig::from_json(text).unwrap();
        assert_eq!(c.noise.kind, NoiseKind::PumpGamma);
        assert_eq!(c.numerics.n_max, NMax::Auto);
        let back = ValidatedConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = r#"{"a":1,"n_b":0.15,"N":35,"theta":10,"delta":0,"bogus":1,
            "noise":{"kind":"none","sigma_sq":0}}"#;
        assert!(ValidatedConfig::from_json(text).is_err());
    }
}
