//! Invariants checked over random configurations.

mod common;

use common::{gamma_average, q_sharp_ref, xi_period};
use maserlab::kernel::{i_one_pump, q_avg_pump, KernelMode};
use maserlab::model::validate_with;
use maserlab::observables::{p_minus, p_plus_peaked_limit, p_plus_resummed};
use maserlab::phase::critical_line_pump;
use maserlab::potential::{find_saddles, v0, v0_prime_asymptotic, v0_second, SaddleKind};
use maserlab::spectrum::{build_generator, correlation_length, spectral_gap};
use maserlab::steady_state::{stationary_distribution, thermal_distribution};
use maserlab::{
    p_joint_all, p_plus, MaserError, MaserParams, NMax, NoiseSpec, NumericControls, PumpKernel, Regime, ResumMode,
    ValidatedConfig,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::f64::consts::PI;

fn nc() -> NumericControls {
    NumericControls::default()
}

fn kernel(p: MaserParams, noise: NoiseSpec, mode: KernelMode) -> PumpKernel {
    PumpKernel::new(p, noise, mode, 1e-10).unwrap()
}

fn noise_strategy(theta: f64) -> BoxedStrategy<NoiseSpec> {
    let mut options = vec![Just(NoiseSpec::NONE).boxed(), (0.001..1.0f64).prop_map(NoiseSpec::detuning_gaussian).boxed()];
    if theta > 0.0 {
        options.push((0.01..30.0f64).prop_map(NoiseSpec::pump_gamma).boxed());
    }
    proptest::strategy::Union::new(options).boxed()
}

prop_compose! {
    fn config()(a in 0.0..=1.0f64, n_b in 0.01..2.0f64, n in 5u32..150, theta in 0.0..30.0f64,
                detuned in any::<bool>(), d in 0.0..1.0f64)
               (noise in noise_strategy(theta), a in Just(a), n_b in Just(n_b), n in Just(n), theta in Just(theta),
                delta in Just(if detuned { d } else { 0.0 })) -> (MaserParams, NoiseSpec) {
        (MaserParams::new(a, n_b, n as f64, theta, delta), noise)
    }
}

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        // failures are reported with their minimal input; no regression files
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cases(128))]

    #[test]
    fn validation_is_idempotent_and_round_trips((p, noise) in config(), fixed in proptest::option::of(1usize..5000)) {
        let numerics = NumericControls { n_max: fixed.map_or(NMax::Auto, NMax::Fixed), ..nc() };
        let c = validate_with(p, noise, numerics).unwrap();
        prop_assert_eq!(c.revalidate().unwrap(), c);
        let back = ValidatedConfig::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(back, c);
        prop_assert_eq!(back.params.theta.to_bits(), c.params.theta.to_bits());
        prop_assert_eq!(back.noise.sigma_sq.to_bits(), c.noise.sigma_sq.to_bits());
    }

    #[test]
    fn kernel_is_a_probability((p, noise) in config(), xs in proptest::collection::vec(0.0..4.0f64, 16)) {
        let k = kernel(p, noise, KernelMode::Averaged);
        for x in xs {
            let q = k.evaluate(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&q), "q({x}) = {q}");
        }
    }

    #[test]
    fn i_one_is_bounded(theta in 0.01..100.0f64, s2 in 0.01..50.0f64, x in 0.0..1.0f64, d in 0.0..1.0f64) {
        prop_assert!(i_one_pump(theta, s2, x, d) <= s2 + theta * theta);
    }

    #[test]
    fn distribution_type_invariants((p, noise) in config()) {
        let k = kernel(p, noise, KernelMode::Averaged);
        let d = stationary_distribution(&p, &k, &nc()).unwrap();
        let total: f64 = d.probs.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(d.probs.iter().all(|v| *v >= 0.0));
        for n in 0..d.n_max {
            let birth = p.n_b * (n + 1) as f64 + p.n_atoms * p.a * d.q[n + 1];
            let death = (1.0 + p.n_b) * (n + 1) as f64 + p.n_atoms * p.b() * d.q[n + 1];
            let (lhs, rhs) = (d.probs[n + 1] * death, d.probs[n] * birth);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs) + 1e-300, "n={n}");
        }
    }

    #[test]
    fn raising_truncation_keeps_retained_values((p, noise) in config()) {
        let k = kernel(p, noise, KernelMode::Averaged);
        let d = stationary_distribution(&p, &k, &nc()).unwrap();
        let wide = NumericControls { n_max: NMax::Fixed(2 * d.n_max), ..nc() };
        let e = stationary_distribution(&p, &k, &wide).unwrap();
        for n in 0..=d.n_max {
            prop_assert!((d.probs[n] - e.probs[n]).abs() <= nc().tail_tol, "n={n}");
        }
    }

    #[test]
    fn excitation_probabilities_are_consistent((p, noise) in config()) {
        let k = kernel(p, noise, KernelMode::Averaged);
        let d = stationary_distribution(&p, &k, &nc()).unwrap();
        let (pp, pm) = (p_plus(&d, &k).unwrap(), p_minus(&d, &k).unwrap());
        prop_assert!((pp + pm - 1.0).abs() <= 1e-12);
        let j = p_joint_all(&d, &k).unwrap();
        prop_assert!((j.pp + j.pm - j.p_plus).abs() <= 1e-10);
        prop_assert!((j.mp + j.mm - j.p_minus).abs() <= 1e-10);
        prop_assert!((j.pp + j.pm + j.mp + j.mm - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn generator_null_vector_and_positive_gap((p, noise) in config()) {
        let g = build_generator(&kernel(p, noise, KernelMode::Averaged), &nc()).unwrap();
        prop_assert!(g.null_residual() <= 1e-10, "{}", g.null_residual());
        prop_assert!(spectral_gap(&g).unwrap() > 0.0);
    }

    #[test]
    fn atom_and_cavity_lengths_coincide((p, noise) in config()) {
        let g = build_generator(&kernel(p, noise, KernelMode::Averaged), &nc()).unwrap();
        let c = correlation_length(&g, &nc()).unwrap();
        prop_assert_eq!(c.xi_atom().to_bits(), c.xi_cavity().to_bits());
        prop_assert_eq!(c.xi, 1.0 / c.lambda);
    }
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn gamma_closed_form_matches_quadrature(x in 0.0..1.0f64, theta in 0.05..100.0f64, s2 in 0.01..50.0f64,
                                           d in prop_oneof![Just(0.0), 0.0..1.0f64]) {
        let u = x + d * d;
        let q = |xi: f64| q_sharp_ref(x, xi, d);
        let panel = if u > 0.0 { 0.25 * xi_period(u) } else { 1.0 };
        let oracle = gamma_average(&q, theta, s2, panel);
        let v = q_avg_pump(x, theta, s2, d).unwrap();
        prop_assert!((v - oracle).abs() <= 1e-8, "{v} {oracle}");
    }

    #[test]
    fn gamma_kernel_reduces_for_narrow_noise(x in 0.0..1.0f64, theta in 5.0..100.0f64, s2 in 0.001..1.0f64,
                                            d in prop_oneof![Just(0.0), 0.0..1.0f64]) {
        prop_assume!(theta * theta / (2.0 * s2) >= 100.0 * s2);
        let u = x + d * d;
        prop_assume!(u > 0.0);
        let reduced = x / u * 0.5 * (1.0 - (-2.0 * u * s2).exp() * (2.0 * theta * u.sqrt()).cos());
        prop_assert!((q_avg_pump(x, theta, s2, d).unwrap() - reduced).abs() <= 1e-3);
    }

    #[test]
    fn effective_slope_matches_difference(theta in 0.05..5.0f64, s2 in 0.01..5.0f64, d in 0.0..1.0f64,
                                          kind in 0u8..3) {
        let noise = match kind {
            0 => NoiseSpec::NONE,
            1 => NoiseSpec::pump_gamma(s2),
            _ => NoiseSpec::detuning_gaussian(s2.min(1.0)),
        };
        let k = kernel(MaserParams::new(1.0, 0.15, 50.0, theta, d), noise, KernelMode::Averaged);
        // q(0) = 0, so q(h)/h has no cancellation; its O(h) offset scales with
        // the square of the coupling spread and is removed by one Richardson step
        let spread = theta + if kind == 1 { s2 / theta } else { 0.0 };
        let h = 1e-5 / (1.0 + spread * spread);
        let fd = 2.0 * k.evaluate(h).unwrap() / h - k.evaluate(2.0 * h).unwrap() / (2.0 * h);
        let t = k.theta_eff_sq().unwrap();
        // near zeros of theta_eff^2 no relative bound holds
        prop_assume!(t >= 1e-2);
        prop_assert!(((t - fd) / t).abs() <= 1e-4, "{t} {fd}");
    }

    #[test]
    fn critical_line_is_thermal_radius(theta in 0.05..10.0f64, s2 in 0.0..10.0f64) {
        let noise = if s2 < 0.01 { NoiseSpec::NONE } else { NoiseSpec::pump_gamma(s2) };
        let a_crit = critical_line_pump(theta, noise.sigma_sq, 0.0, Regime::General).unwrap();
        prop_assume!(a_crit < 1.0);
        let k = kernel(MaserParams::new(a_crit, 0.15, 100.0, theta, 0.0), noise, KernelMode::Averaged);
        let t = k.theta_eff_sq().unwrap();
        // a coarse tail keeps the geometric series short near the line; a
        // truncation error still means the series converges
        let normalizable = |a: f64| {
            !matches!(
                thermal_distribution(&MaserParams::new(a, 0.15, 100.0, theta, 0.0), t, 0.1),
                Err(MaserError::NonNormalizable(_))
            )
        };
        let (mut lo, mut hi) = (0.5, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if normalizable(mid) { lo = mid } else { hi = mid }
        }
        prop_assert!((lo - a_crit).abs() <= 1e-6, "{lo} {a_crit}");
    }

    #[test]
    fn saddles_switch_on_at_the_critical_line(theta in 0.3..10.0f64, s2 in 0.0..10.0f64, n_b in 0.0..1.0f64) {
        let noise = if s2 < 0.01 { NoiseSpec::NONE } else { NoiseSpec::pump_gamma(s2) };
        let a_crit = critical_line_pump(theta, noise.sigma_sq, 0.0, Regime::General).unwrap();
        prop_assume!(1.01 * a_crit <= 1.0);
        let count = |a: f64| {
            let k = kernel(MaserParams::new(a, n_b, 100.0, theta, 0.0), noise, KernelMode::Averaged);
            find_saddles(&k, &nc()).unwrap().minima().count()
        };
        prop_assert!(count(1.01 * a_crit) >= 1);
        prop_assert_eq!(count(0.99 * a_crit), 0);
    }

    #[test]
    fn critical_line_is_monotone(theta in 0.05..10.0f64, s2 in 0.0..10.0f64, dt in 0.01..1.0f64, ds in 0.01..1.0f64) {
        let a = critical_line_pump(theta, s2, 0.0, Regime::General).unwrap();
        prop_assert!(critical_line_pump(theta + dt, s2, 0.0, Regime::General).unwrap() < a);
        prop_assert!(critical_line_pump(theta, s2 + ds, 0.0, Regime::General).unwrap() < a);
    }

    #[test]
    fn dense_nonsymmetric_gap_agrees((p, noise) in config(), m in 20usize..=300) {
        let p = MaserParams::new(p.a, p.n_b, p.n_atoms.min(60.0), p.theta.min(15.0), p.delta);
        let numerics = NumericControls { n_max: NMax::Fixed(m), ..nc() };
        let g = build_generator(&kernel(p, noise, KernelMode::Averaged), &numerics).unwrap();
        let n = g.n_max() + 1;
        let (b, dn) = (&g.birth, &g.death);
        let l = DMatrix::from_fn(n, n, |i, j| {
            if i == j { b[i] + dn[i] } else if i == j + 1 { -b[j] } else if j == i + 1 { -dn[j] } else { 0.0 }
        });
        let mut ev: Vec<f64> = l.complex_eigenvalues().iter().map(|z| z.re).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let gap = spectral_gap(&g).unwrap();
        prop_assume!(gap > 1e-6 * ev[n - 1]);
        prop_assert!(((ev[1] - gap) / gap).abs() <= 1e-8, "{} {gap}", ev[1]);
    }

    #[test]
    fn gap_is_stable_under_truncation_doubling((p, noise) in config()) {
        let k = kernel(p, noise, KernelMode::Averaged);
        let g = build_generator(&k, &nc()).unwrap();
        let wide = NumericControls { n_max: NMax::Fixed(2 * g.n_max()), ..nc() };
        let (a, b) = (spectral_gap(&g).unwrap(), spectral_gap(&build_generator(&k, &wide).unwrap()).unwrap());
        prop_assert!(((a - b) / a).abs() <= 1e-8, "{a} {b}");
    }
}

/// Configs with a single maser minimum at large N.
fn single_phase(a: f64, theta: f64, n: f64, s2: f64) -> Option<(MaserParams, PumpKernel, f64, f64)> {
    let noise = if s2 < 0.01 { NoiseSpec::NONE } else { NoiseSpec::pump_gamma(s2) };
    let p = MaserParams::new(a, 0.15, n, theta, 0.0);
    let k = kernel(p, noise, KernelMode::Averaged);
    let r = find_saddles(&k, &nc()).unwrap();
    let mins: Vec<_> = r.minima().collect();
    if mins.len() != 1 {
        return None;
    }
    Some((p, k, mins[0].x, mins[0].sigma_x.unwrap()))
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn order_parameter_sits_at_the_saddle(a in 0.6..1.0f64, theta in 0.5..20.0f64, n in 500.0..2000.0f64, s2 in 0.0..5.0f64) {
        let Some((p, k, xs, sx)) = single_phase(a, theta, n, s2) else { return Ok(()) };
        let d = stationary_distribution(&p, &k, &nc()).unwrap();
        prop_assert!((d.order_parameter() - xs).abs() <= 3.0 * sx, "{} {xs} {sx}", d.order_parameter());
    }

    #[test]
    fn gaussian_approximation_near_the_minimum(a in 0.6..1.0f64, theta in 0.5..20.0f64, n in 500.0..2000.0f64, s2 in 0.0..5.0f64) {
        let Some((p, k, xs, sx)) = single_phase(a, theta, n, s2) else { return Ok(()) };
        let d = stationary_distribution(&p, &k, &nc()).unwrap();
        for (i, pn) in d.probs.iter().enumerate() {
            let x = i as f64 / n;
            if (x - xs).abs() > 2.0 * sx {
                continue;
            }
            let g = (-(x - xs).powi(2) / (2.0 * sx * sx)).exp() / ((2.0 * PI).sqrt() * sx * n);
            prop_assert!((pn / g - 1.0).abs() <= 0.1, "n={i} {pn} {g}");
        }
    }

    #[test]
    fn unique_minimum_weight_is_root_curvature(a in 0.6..1.0f64, theta in 0.5..20.0f64, s2 in 0.0..5.0f64) {
        let Some((_, k, xs, _)) = single_phase(a, theta, 100.0, s2) else { return Ok(()) };
        let r = find_saddles(&k, &nc()).unwrap();
        let m = r.saddles.iter().find(|s| s.kind == SaddleKind::Min).unwrap();
        let want = v0_second(&k, xs).unwrap().sqrt();
        prop_assert!((m.weight.unwrap() / want - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn peaked_limit_relation(a in 0.6..1.0f64, theta in 0.5..20.0f64, n in 500.0..2000.0f64, s2 in 0.0..5.0f64) {
        let Some((p, k, _, _)) = single_phase(a, theta, n, s2) else { return Ok(()) };
        let d = stationary_distribution(&p, &k, &nc()).unwrap();
        let xb = d.order_parameter();
        prop_assume!(xb > 5.0 * d.std_x());
        let (smooth, linear) = p_plus_peaked_limit(&k, xb).unwrap();
        prop_assert!((smooth - linear).abs() <= 0.02, "{smooth} {linear}");
        prop_assert!((p_plus(&d, &k).unwrap() - linear).abs() <= 0.02);
    }
}

#[test]
fn exact_resummation_matches_direct_sum() {
    for theta in [5.0, 20.0, 100.0] {
        let p = MaserParams::new(1.0, 0.15, 35.0, theta, 0.0);
        let k = kernel(p, NoiseSpec::NONE, KernelMode::Sharp);
        let d = stationary_distribution(&p, &k, &nc()).unwrap();
        let r = p_plus_resummed(&d, &p, 4096, ResumMode::Exact).unwrap();
        assert!((r.p_plus - p_plus(&d, &k).unwrap()).abs() <= 1e-6, "theta={theta}");
    }
}

#[test]
fn barrier_shrinks_with_pump_noise() {
    let mut last = f64::INFINITY;
    for s2 in [0.0, 0.1, 0.5, 1.0, 2.5, 5.0] {
        let noise = if s2 == 0.0 { NoiseSpec::NONE } else { NoiseSpec::pump_gamma(s2) };
        let top = (1..=400)
            .map(|i| {
                let k = kernel(MaserParams::new(1.0, 0.15, 100.0, i as f64 * 0.05, 0.0), noise, KernelMode::Averaged);
                find_saddles(&k, &nc()).unwrap().barrier.unwrap_or(0.0)
            })
            .fold(0.0, f64::max);
        assert!(top < last, "sigma^2={s2}: {top} after {last}");
        last = top;
    }
}

#[test]
fn asymptotic_slope_matches_potential_difference() {
    let p = MaserParams::new(1.0, 0.15, 35.0, 400.0, 0.0);
    let k = kernel(p, NoiseSpec::NONE, KernelMode::Sharp);
    // x at phase phi of cos(2 theta sqrt x)
    let at = |phi: f64| (phi / (2.0 * p.theta)).powi(2);
    let mut x: f64 = 0.05;
    while x <= 0.6 {
        // difference quotients of v0 across one full oscillation, averaged
        // over shifted windows so the uneven dx/dphi weighting cancels
        let phi = 2.0 * p.theta * x.sqrt();
        let shifts = 8;
        let fd = (0..shifts)
            .map(|j| {
                let c = phi + 2.0 * PI * ((j as f64 + 0.5) / shifts as f64 - 0.5);
                let (lo, hi) = (at(c - PI), at(c + PI));
                (v0(&k, hi).unwrap() - v0(&k, lo).unwrap()) / (hi - lo)
            })
            .sum::<f64>()
            / shifts as f64;
        let slope = v0_prime_asymptotic(&p, &NoiseSpec::NONE, x).unwrap();
        assert!((fd - slope).abs() <= 1e-3, "x={x}: {fd} {slope}");
        x += 0.01;
    }
}
