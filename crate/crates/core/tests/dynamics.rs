mod common;

use common::kernel;
use proptest::prelude::*;
use soliton_rigidity::dynamics::{
    equilateral, perturbed_equilateral, perturbed_rhs, project_to_rigid_manifold, rhs, simulate, two_body, PerturbationSpec, ProjectionOptions,
    SimulationConfig, SolitonConfiguration, Trajectory,
};
use soliton_rigidity::Error;

fn run(init: &SolitonConfiguration, d: usize, s_max: f64, stride: f64) -> Trajectory {
    let cfg = SimulationConfig { s_max, stride, ..SimulationConfig::default() };
    simulate(init, &kernel(d), &cfg).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn unit(a: &[f64], b: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn opposite_signs_repel_along_the_axis() {
    let k = kernel(2);
    let v = rhs(&two_body(2, 12.0, false).unwrap(), &k).unwrap();
    let f = k.force(12.0);
    assert!((v[0][0] + f).abs() <= 1e-15 * f && v[0][1] == 0.0);
    assert!((v[1][0] - f).abs() <= 1e-15 * f && v[1][1] == 0.0);
}

#[test]
fn like_signs_attract() {
    let k = kernel(3);
    let v = rhs(&two_body(3, 9.0, true).unwrap(), &k).unwrap();
    let f = k.force(9.0);
    assert!((v[0][0] - f).abs() <= 1e-15 * f);
    assert!((v[1][0] + f).abs() <= 1e-15 * f);
}

#[test]
fn equilateral_velocities_are_radial_with_a_fixed_origin() {
    let k = kernel(2);
    let r = 15.0;
    let cfg = equilateral(2, r).unwrap();
    let v = rhs(&cfg, &k).unwrap();
    assert!(v[0].iter().all(|x| x.abs() <= 1e-14 * k.force(r)));
    // Each outer center is pushed out by z_0 and pulled in by the other two at distance √3 R.
    let radial = k.force(r) - 2.0 * k.force(3f64.sqrt() * r) * 3f64.sqrt() / 2.0;
    for (j, vj) in v.iter().enumerate().skip(1) {
        let u = unit(cfg.center(0), cfg.center(j));
        let along: f64 = vj.iter().zip(&u).map(|(a, b)| a * b).sum();
        let across = ((vj[0] - along * u[0]).powi(2) + (vj[1] - along * u[1]).powi(2)).sqrt();
        assert!((along / radial - 1.0).abs() <= 1e-12, "{along} vs {radial}");
        assert!(across <= 1e-12 * radial);
    }
}

#[test]
fn centers_closer_than_one_are_rejected() {
    let k = kernel(2);
    let cfg = two_body(2, 0.5, false).unwrap();
    assert!(matches!(rhs(&cfg, &k), Err(Error::TooClose { .. })));
}

#[test]
fn equilateral_angles_stay_at_minus_one_half() {
    let cfg = SimulationConfig { s_max: 50.0, stride: 0.5, ..SimulationConfig::default() };
    let traj = simulate(&equilateral(2, 12.0).unwrap(), &kernel(2), &cfg).unwrap();
    assert!(traj.collision.is_none());
    for n in 0..traj.len() {
        let c = traj.config(n);
        let u: Vec<Vec<f64>> = (1..4).map(|j| unit(c.center(0), c.center(j))).collect();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let cos: f64 = u[a].iter().zip(&u[b]).map(|(x, y)| x * y).sum();
            assert!((cos + 0.5).abs() <= 10.0 * cfg.rel_tol, "s={} cos={cos}", traj.s[n]);
        }
    }
}

#[test]
fn same_sign_pair_collides() {
    let traj = run(&two_body(2, 12.0, true).unwrap(), 2, 1e4, 1.0);
    let c = traj.collision.expect("like-signed pair must collide");
    assert!(c.s.is_finite() && c.distance < 2.5);
    assert!(*traj.s.last().unwrap() <= c.s);
}

#[test]
fn opposite_sign_pair_moves_on_a_line() {
    let k = kernel(3);
    let mut init = two_body(3, 12.0, false).unwrap();
    init.centers[4] = 3.0;
    let cfg = SimulationConfig { s_max: 300.0, stride: 0.05, ..SimulationConfig::default() };
    let traj = simulate(&init, &k, &cfg).unwrap();
    assert!(traj.collision.is_none());
    let u0 = unit(&init.centers[0..3], &init.centers[3..6]);
    for n in 0..traj.len() {
        let c = traj.config(n);
        assert!(max_abs_diff(&unit(c.center(0), c.center(1)), &u0) <= 1e-10);
    }
    // dρ/ds = 2 t F(ρ), checked by central differences.
    let h = cfg.stride;
    for n in (1..traj.len() - 1).step_by(97) {
        let rho = |m: usize| traj.config(m).distance(0, 1);
        let numeric = (rho(n + 1) - rho(n - 1)) / (2.0 * h);
        let exact = 2.0 * (traj.s[n] + k.ln_force(rho(n))).exp();
        assert!((numeric / exact - 1.0).abs() <= 1e-3, "s={}: {numeric} vs {exact}", traj.s[n]);
    }
}

#[test]
fn frames_are_uniform_in_log_time() {
    let traj = run(&equilateral(3, 10.0).unwrap(), 3, 40.0, 0.25);
    assert_eq!(traj.len(), 161);
    assert!(traj.s.windows(2).all(|w| w[1] > w[0] && ((w[1] - w[0]) - 0.25).abs() < 1e-12));
    assert!(traj.collision.is_none());
    assert!(traj.stats.accepted > 0 && traj.stats.rhs_evals >= 6 * traj.stats.accepted);
}

#[test]
fn halving_the_step_cap_barely_moves_the_end_state() {
    let init = perturbed_equilateral(2, 12.0, 0.1, 4).unwrap();
    let k = kernel(2);
    let base = SimulationConfig { s_max: 30.0, stride: 1.0, h_max: Some(0.02), ..SimulationConfig::default() };
    let a = simulate(&init, &k, &base).unwrap();
    let b = simulate(&init, &k, &SimulationConfig { h_max: Some(0.01), ..base.clone() }).unwrap();
    let scale = a.frames.last().unwrap().iter().map(|x| x.abs()).fold(1.0, f64::max);
    let diff = max_abs_diff(a.frames.last().unwrap(), b.frames.last().unwrap());
    assert!(diff <= 10.0 * base.rel_tol * scale, "diff = {diff}, scale = {scale}");
}

#[test]
fn simulation_is_deterministic() {
    let init = perturbed_equilateral(2, 12.0, 0.2, 11).unwrap();
    let pert = PerturbationSpec { amplitude: 1.0, theta: 1.5, seed: 3 };
    let cfg = SimulationConfig { s_max: 40.0, perturbation: Some(pert), ..SimulationConfig::default() };
    let a = simulate(&init, &kernel(2), &cfg).unwrap();
    let b = simulate(&init, &kernel(2), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_perturbation_is_bitwise_the_plain_field() {
    let k = kernel(2);
    let cfg = perturbed_equilateral(2, 12.0, 0.2, 5).unwrap();
    let pert = PerturbationSpec { amplitude: 0.0, theta: 1.5, seed: 9 };
    assert_eq!(perturbed_rhs(&cfg, &k, &pert, 17).unwrap(), rhs(&cfg, &k).unwrap());
}

#[test]
fn perturbation_respects_its_bound() {
    let k = kernel(2);
    let cfg = perturbed_equilateral(2, 12.0, 0.2, 5).unwrap();
    let pert = PerturbationSpec { amplitude: 1.0, theta: 1.5, seed: 9 };
    let (dmin, _, _) = cfg.min_distance();
    for step in 0..200 {
        let a = perturbed_rhs(&cfg, &k, &pert, step).unwrap();
        let b = rhs(&cfg, &k).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let n = x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            assert!(n <= (-1.5 * dmin).exp() * (1.0 + 1e-12));
        }
    }
    let sim = SimulationConfig { s_max: 40.0, perturbation: Some(pert), ..SimulationConfig::default() };
    let traj = simulate(&cfg, &k, &sim).unwrap();
    assert!(traj.stats.perturbation_ratio > 0.0 && traj.stats.perturbation_ratio <= 1.0 + 1e-12);
}

#[test]
fn invalid_settings_are_rejected() {
    let k = kernel(2);
    let init = equilateral(2, 12.0).unwrap();
    for cfg in [
        SimulationConfig { rel_tol: 1e-13, ..SimulationConfig::default() },
        SimulationConfig { rel_tol: 1e-5, ..SimulationConfig::default() },
        SimulationConfig { t0: 0.5, ..SimulationConfig::default() },
        SimulationConfig { perturbation: Some(PerturbationSpec { amplitude: 1.0, theta: 2.0, seed: 0 }), ..SimulationConfig::default() },
        SimulationConfig { perturbation: Some(PerturbationSpec { amplitude: 1.0, theta: 1.0, seed: 0 }), ..SimulationConfig::default() },
    ] {
        assert!(simulate(&init, &k, &cfg).is_err());
    }
}

#[test]
fn separation_grows_at_least_like_a_thousandth_of_the_force() {
    let k = kernel(2);
    let sim = SimulationConfig { s_max: 200.0, stride: 0.05, ..SimulationConfig::default() };
    let opts = ProjectionOptions::default();
    let init = project_to_rigid_manifold(&perturbed_equilateral(2, 12.0, 0.2, 1).unwrap(), &k, &sim, &opts).unwrap().config;
    let traj = simulate(&init, &k, &sim).unwrap();
    assert!(traj.collision.is_none());
    let dmin = |n: usize| traj.config(n).min_distance().0;
    for n in 1..traj.len() - 1 {
        if traj.s[n] < 20.0 {
            continue;
        }
        let rate = (dmin(n + 1) - dmin(n - 1)) / (2.0 * sim.stride);
        let bound = (traj.s[n] + k.ln_force(dmin(n))).exp() / 1000.0;
        assert!(rate >= bound, "s={}: dD/ds = {rate} < {bound}", traj.s[n]);
    }
}

fn rotate(cfg: &SolitonConfiguration, angle: f64, reflect: bool) -> SolitonConfiguration {
    let (s, c) = angle.sin_cos();
    let mut out = cfg.clone();
    for k in 0..cfg.len() {
        let (x, y) = (cfg.centers[2 * k], cfg.centers[2 * k + 1]);
        let y = if reflect { -y } else { y };
        out.centers[2 * k] = c * x - s * y;
        out.centers[2 * k + 1] = s * x + c * y;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn field_is_translation_equivariant(seed in 0u64..1000, y0 in -50.0f64..50.0, y1 in -50.0f64..50.0) {
        let k = kernel(2);
        let cfg = perturbed_equilateral(2, 12.0, 0.2, seed).unwrap();
        let mut moved = cfg.clone();
        for i in 0..4 {
            moved.centers[2 * i] += y0;
            moved.centers[2 * i + 1] += y1;
        }
        let a = rhs(&cfg, &k).unwrap().concat();
        let b = rhs(&moved, &k).unwrap().concat();
        let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!(max_abs_diff(&a, &b) <= 1e-10 * scale);
    }

    #[test]
    fn field_is_rotation_equivariant(seed in 0u64..1000, angle in 0.0f64..6.3, reflect: bool) {
        let k = kernel(2);
        let cfg = perturbed_equilateral(2, 12.0, 0.2, seed).unwrap();
        let v = rhs(&cfg, &k).unwrap().concat();
        let rotated_v = rotate(&SolitonConfiguration { centers: v.clone(), ..cfg.clone() }, angle, reflect).centers;
        let w = rhs(&rotate(&cfg, angle, reflect), &k).unwrap().concat();
        let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!(max_abs_diff(&rotated_v, &w) <= 1e-10 * scale);
    }

    #[test]
    fn flipping_every_sign_leaves_the_field_unchanged(seed in 0u64..1000) {
        let k = kernel(3);
        let cfg = perturbed_equilateral(3, 12.0, 0.2, seed).unwrap();
        let flipped = SolitonConfiguration { signs: cfg.signs.iter().map(|s| -s).collect(), ..cfg.clone() };
        prop_assert_eq!(rhs(&cfg, &k).unwrap(), rhs(&flipped, &k).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn trajectories_are_translation_and_rotation_equivariant(seed in 0u64..1000, angle in 0.0f64..6.3, y0 in -20.0f64..20.0) {
        let init = perturbed_equilateral(2, 12.0, 0.1, seed).unwrap();
        let base = run(&init, 2, 25.0, 5.0);
        prop_assume!(base.collision.is_none());
        let mut shifted = init.clone();
        for i in 0..4 {
            shifted.centers[2 * i] += y0;
        }
        let moved = run(&shifted, 2, 25.0, 5.0);
        let turned = run(&rotate(&init, angle, false), 2, 25.0, 5.0);
        let last = base.last();
        let scale = last.centers.iter().map(|x| x.abs()).fold(1.0, f64::max) + y0.abs();
        let mut expect = last.clone();
        for i in 0..4 {
            expect.centers[2 * i] += y0;
        }
        prop_assert!(max_abs_diff(&moved.last().centers, &expect.centers) <= 100.0 * 1e-9 * scale);
        prop_assert!(max_abs_diff(&turned.last().centers, &rotate(&last, angle, false).centers) <= 100.0 * 1e-9 * scale);
    }
}
