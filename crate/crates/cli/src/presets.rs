//! Figure presets. Each writes a CSV and a JSON sidecar holding every
//! resolved config it ran.

use anyhow::{bail, Result};
use maserlab::model::validate;
use maserlab::{KernelMode, MaserParams, NoiseSpec, ValidatedConfig};
use std::f64::consts::PI;

use crate::config::{config_err, grid};
use crate::sweep::{Output, SweepRequest};

pub enum Preset {
    /// Theta sweeps, one per labelled config.
    Sweeps(Vec<(f64, SweepRequest)>),
    /// Critical lines a(theta), one per labelled config.
    Phase(Vec<(f64, ValidatedConfig, Vec<f64>)>),
}

pub const NAMES: [&str; 7] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

fn cfg(n_atoms: f64, noise: NoiseSpec) -> ValidatedConfig {
    validate(MaserParams::new(1.0, 0.15, n_atoms, 1.0, 0.0), noise).expect("preset config is valid")
}

/// The recorded config carries the top of its grid as theta.
fn at_top(mut config: ValidatedConfig, thetas: &[f64]) -> ValidatedConfig {
    config.params.theta = thetas[thetas.len() - 1];
    config
}

fn sweep(config: ValidatedConfig, thetas: Vec<f64>, outputs: &[Output]) -> SweepRequest {
    SweepRequest {
        config: at_top(config, &thetas),
        thetas,
        outputs: outputs.to_vec(),
        measure: KernelMode::Sharp,
    }
}

/// Gamma noise needs theta > 0, so its grids start one step in.
pub fn build(name: &str) -> Result<Preset> {
    use Output::*;
    let probs = [PPlus, PJointPp];
    Ok(match name {
        "fig1" => Preset::Sweeps(vec![(0.0, sweep(cfg(35.0, NoiseSpec::NONE), grid(0.0, 60.0, 241), &probs))]),
        "fig2" => Preset::Phase(
            [0.1, 1.0, 10.0]
                .iter()
                .map(|&s| {
                    let g = grid(0.0, 10.0, 201);
                    (s, at_top(cfg(35.0, NoiseSpec::pump_gamma(s)), &g), g)
                })
                .collect(),
        ),
        "fig3" => Preset::Sweeps(vec![(
            25.0,
            sweep(cfg(35.0, NoiseSpec::pump_gamma(25.0)), grid(0.25, 60.0, 240), &probs),
        )]),
        "fig4" => {
            let theta1 = 2.0 * PI * 35.0 * 0.5f64.sqrt();
            let top = (2.5 * theta1 / 0.25).ceil() * 0.25;
            let steps = (top / 0.25).round() as usize;
            Preset::Sweeps(vec![(
                25.0,
                sweep(cfg(35.0, NoiseSpec::pump_gamma(25.0)), grid(0.25, top, steps), &[PPlus, Resummed]),
            )])
        }
        "fig5" => Preset::Sweeps(vec![(
            25.0,
            sweep(cfg(800.0, NoiseSpec::detuning_gaussian(25.0)), grid(0.0, 60.0, 241), &[PPlus, PJointPp, XBar]),
        )]),
        "fig6" => Preset::Sweeps(vec![(
            0.1,
            sweep(cfg(35.0, NoiseSpec::detuning_gaussian(0.1)), grid(0.0, 60.0, 241), &[PPlus, PJointPp, XBar]),
        )]),
        "fig7" => Preset::Sweeps(
            [0.0, 0.1, 0.5, 1.0, 2.5, 5.0]
                .iter()
                .map(|&s| {
                    let noise = if s == 0.0 { NoiseSpec::NONE } else { NoiseSpec::pump_gamma(s) };
                    (s, sweep(cfg(100.0, noise), grid(0.05, 20.0, 400), &[Corr]))
                })
                .collect(),
        ),
        _ => bail!(config_err(format!("unknown preset '{name}', expected one of {}", NAMES.join(", ")))),
    })
}
