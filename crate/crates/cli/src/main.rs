//! maserlab: theta sweeps, critical lines, saddle reports, correlation
//! lengths and figure presets for the noisy one-atom micromaser.
//!
//! Exit status is 0 when every row computed, 2 on a bad config or flag,
//! 3 when some rows carry an error, and 1 on IO failure.

mod config;
mod presets;
mod sweep;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use maserlab::csvfmt::num;
use maserlab::observables::asymptotic_joint;
use maserlab::phase::Regime;
use maserlab::potential::{asymptotic_min, detuning_wide_noise_root, find_saddles, SaddleKind};
use maserlab::{NoiseKind, PumpKernel, ValidatedConfig};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::{config_err, parse_measure, parse_range, ConfigArgs, ConfigError};
use presets::Preset;
use sweep::{clean, critical_a, parse_outputs, run_sweep, summary, write_csv, SweepRequest};

#[derive(Parser, Debug)]
#[command(name = "maserlab", version, about = "Steady-state observables of the noisy one-atom micromaser")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// min:max:steps, an inclusive grid of `steps` points
    #[arg(long = "theta-range")]
    theta_range: Option<String>,
    /// Output CSV path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Observables over a theta grid
    Sweep {
        #[command(flatten)]
        args: SweepArgs,
        /// Comma list of p_plus, p_joint_pp, x_bar, corr, v0, saddles, critical_line, resummed
        #[arg(long, default_value = "p_plus,p_joint_pp,x_bar")]
        outputs: String,
        /// Kernel used to read out atom excitation: sharp or averaged
        #[arg(long, default_value = "sharp")]
        measure: String,
    },
    /// Thermal-maser critical line a(theta)
    Phase {
        #[command(flatten)]
        args: SweepArgs,
    },
    /// Saddle points of the effective potential at one theta
    Saddle {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral gap and correlation length over a theta grid
    Corr {
        #[command(flatten)]
        args: SweepArgs,
    },
    /// Reproduce a figure preset (fig1 to fig7)
    Figure {
        name: String,
        /// Output CSV path, `<name>.csv` when absent; the sidecar goes next to it
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("MASERLAB_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(config_err(format!("MASERLAB_THREADS '{s}' is not a positive integer"))),
        },
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(bytes)?;
            Ok(so.flush()?)
        }
    }
}

fn grid_of(args: &SweepArgs, cfg: &ConfigArgs) -> Result<Vec<f64>> {
    match &args.theta_range {
        Some(r) => parse_range(r),
        None => {
            let c = config::resolve(cfg, None)?;
            Ok(vec![c.params.theta])
        }
    }
}

fn sweep_request(args: &SweepArgs, outputs: &str, measure: &str) -> Result<SweepRequest> {
    let thetas = grid_of(args, &args.cfg)?;
    let config = config::resolve(&args.cfg, thetas.last().copied())?;
    Ok(SweepRequest {
        config,
        thetas,
        outputs: parse_outputs(outputs)?,
        measure: parse_measure(measure)?,
    })
}

/// Runs a sweep and returns its CSV and failed-row count.
fn sweep_csv(req: &SweepRequest) -> Result<(Vec<u8>, usize)> {
    let rows = run_sweep(req);
    let mut buf = Vec::new();
    write_csv(&mut buf, req, &rows)?;
    Ok((buf, rows.iter().filter(|r| r.cells.is_err()).count()))
}

fn phase_csv(cfg: &ValidatedConfig, thetas: &[f64]) -> (Vec<u8>, usize) {
    let rows: Vec<_> = thetas
        .par_iter()
        .map(|&t| {
            let c = ValidatedConfig {
                params: cfg.params.with_theta(t),
                ..*cfg
            };
            (t, critical_a(&c))
        })
        .collect();
    let mut s = String::from("theta,a_crit,regime,error\n");
    let mut failed = 0;
    for (t, r) in rows {
        match r {
            Ok(a) => {
                let tag = if a <= 1.0 { Regime::General.name() } else { "no_transition" };
                s += &format!("{},{},{tag},\n", num(t), num(a));
            }
            Err(e) => {
                failed += 1;
                s += &format!("{},,,{}\n", num(t), clean(&e.to_string()));
            }
        }
    }
    (s.into_bytes(), failed)
}

fn saddle_report(cfg: &ValidatedConfig) -> Result<String> {
    let k = PumpKernel::averaged(cfg);
    let r = find_saddles(&k, &cfg.numerics).map_err(|e| config_err(e.to_string()))?;
    let p = &cfg.params;
    let mut s = format!(
        "# a={} n_b={} N={} theta={} delta={} noise={}:{}\n",
        p.a,
        p.n_b,
        p.n_atoms,
        p.theta,
        p.delta,
        maserlab::model::noise_kind_name(cfg.noise.kind),
        cfg.noise.sigma_sq
    );
    if r.is_thermal() {
        s += "# thermal phase: V0 has no minimum, the field is thermal\n";
    }
    if cfg.noise.kind == NoiseKind::DetuningGaussian {
        if let Ok(x) = detuning_wide_noise_root(p.a, cfg.noise.sigma_sq) {
            s += &format!("# wide detuning noise: large-theta x_bar near {}\n", num(x));
        }
    }
    match asymptotic_min(p, &cfg.noise, cfg.numerics.root_tol) {
        Ok(m) => {
            s += &format!(
                "# asymptotic: x_inf={} P_inf(+)={} P_inf(+,+)={}\n",
                num(m.xbar),
                num(m.p_plus),
                num(asymptotic_joint(m.p_plus))
            )
        }
        Err(e) => s += &format!("# asymptotic: unavailable ({})\n", clean(&e.to_string())),
    }
    if let Some(b) = r.barrier {
        s += &format!("# barrier={}\n", num(b));
    }
    s += "x,kind,v0,v0_second,sigma_x,weight,global\n";
    for (i, d) in r.saddles.iter().enumerate() {
        let kind = match d.kind {
            SaddleKind::Min => "min",
            SaddleKind::Max => "max",
        };
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        s += &format!(
            "{},{kind},{},{},{},{},{}\n",
            num(d.x),
            num(d.v0),
            num(d.v0_second),
            opt(d.sigma_x),
            opt(d.weight),
            u8::from(r.global_min == Some(i))
        );
    }
    Ok(s)
}

/// Prefixes every CSV line with a label column.
fn labelled(label: &str, value: f64, csv: &[u8], header: bool) -> String {
    let text = String::from_utf8_lossy(csv);
    let mut lines = text.lines();
    let mut s = String::new();
    let head = lines.next().unwrap_or_default();
    if header {
        s += &format!("{label},{head}\n");
    }
    for l in lines {
        s += &format!("{},{l}\n", num(value));
    }
    s
}

fn run_figure(name: &str, out: Option<PathBuf>) -> Result<usize> {
    let preset = presets::build(name)?;
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    let mut csv = String::new();
    let mut failed = 0;
    let mut configs = Vec::new();
    let mut extra = json!({});
    match &preset {
        Preset::Sweeps(list) => {
            let multi = list.len() > 1;
            for (i, (s2, req)) in list.iter().enumerate() {
                let (bytes, f) = sweep_csv(req)?;
                failed += f;
                if multi {
                    csv += &labelled("sigma_sq", *s2, &bytes, i == 0);
                } else {
                    csv += &String::from_utf8_lossy(&bytes);
                }
                configs.push(serde_json::from_str::<Value>(&req.config.to_json())?);
                if let Some(line) = summary(req) {
                    eprintln!("{name}: {line}");
                }
            }
            let req = &list[0].1;
            extra = json!({
                "theta_grid": {
                    "min": req.thetas[0],
                    "max": req.thetas[req.thetas.len() - 1],
                    "steps": req.thetas.len(),
                },
                "outputs": req.outputs.iter().flat_map(|o| o.columns().iter().copied()).collect::<Vec<_>>(),
                "measure": format!("{:?}", req.measure).to_lowercase(),
            });
        }
        Preset::Phase(list) => {
            for (i, (s2, cfg, thetas)) in list.iter().enumerate() {
                let (bytes, f) = phase_csv(cfg, thetas);
                failed += f;
                csv += &labelled("sigma_sq", *s2, &bytes, i == 0);
                configs.push(serde_json::from_str::<Value>(&cfg.to_json())?);
            }
            let t = &list[0].2;
            extra = json!({"theta_grid": {"min": t[0], "max": t[t.len() - 1], "steps": t.len()}});
        }
    }
    let mut side = json!({"preset": name, "configs": configs});
    if let (Value::Object(m), Value::Object(e)) = (&mut side, extra) {
        m.extend(e);
    }
    emit(Some(&out), csv.as_bytes())?;
    let side_path = out.with_extension("json");
    std::fs::write(&side_path, serde_json::to_string_pretty(&side)? + "\n")
        .with_context(|| format!("writing {}", side_path.display()))?;
    Ok(failed)
}

fn run(cli: Cli) -> Result<usize> {
    match cli.command {
        Command::Sweep { args, outputs, measure } => {
            let req = sweep_request(&args, &outputs, &measure)?;
            let (bytes, failed) = sweep_csv(&req)?;
            emit(args.out.as_deref(), &bytes)?;
            if let Some(line) = summary(&req) {
                eprintln!("{line}");
            }
            Ok(failed)
        }
        Command::Corr { args } => {
            let req = sweep_request(&args, "corr", "averaged")?;
            let (bytes, failed) = sweep_csv(&req)?;
            emit(args.out.as_deref(), &bytes)?;
            Ok(failed)
        }
        Command::Phase { args } => {
            let (cfg, theta) = config::resolve_for_phase(&args.cfg)?;
            let thetas = match &args.theta_range {
                Some(r) => parse_range(r)?,
                None => vec![theta],
            };
            let (bytes, failed) = phase_csv(&cfg, &thetas);
            emit(args.out.as_deref(), &bytes)?;
            Ok(failed)
        }
        Command::Saddle { cfg, out } => {
            let c = config::resolve(&cfg, None)?;
            emit(out.as_deref(), saddle_report(&c)?.as_bytes())?;
            Ok(0)
        }
        Command::Figure { name, out } => run_figure(&name, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads().and_then(|n| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = n {
            b = b.num_threads(n);
        }
        let pool = b.build()?;
        pool.install(|| run(cli))
    });
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} row(s) failed, see the error column");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
