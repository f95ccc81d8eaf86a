mod common;

use common::kernel;
use nalgebra::DMatrix;
use proptest::prelude::*;
use soliton_rigidity::dynamics::{equilateral, perturbed_equilateral, SolitonConfiguration};
use soliton_rigidity::geometry::{
    angle_ode_coefficients, c_heart, frame_observables_with_l, gram_inequality_suite, gram_package, lyapunov_package, lyapunov_value, mid3,
    triangle_angle_bounds, xi_from, GramAngles, CSV_COLUMNS,
};
use soliton_rigidity::Error;

fn frame(centers: Vec<Vec<f64>>) -> SolitonConfiguration {
    let d = centers[0].len();
    SolitonConfiguration::new(d, centers, vec![1, -1, -1, -1]).unwrap()
}

#[test]
fn equilateral_frame_observables() {
    let r = 14.0;
    let k = kernel(2);
    let obs = frame_observables_with_l(&equilateral(2, r).unwrap(), &k, 5.0, r).unwrap();
    for c in obs.c.as_array() {
        assert!((c + 0.5).abs() < 1e-15);
    }
    assert!(obs.gram_a.abs() < 1e-15);
    assert!(obs.frak_c < 1e-14 && obs.d.iter().all(|x| x.abs() < 1e-15));
    assert!(obs.cal_w < 1e-13);
    assert_eq!(obs.cal_x, f64::INFINITY);
    assert!(obs.a.iter().chain(&obs.xi).chain(&obs.zeta).all(|x| x.abs() < 1e-13));
    assert!(obs.lyapunov.abs() < 1e-25);
    assert!((obs.d_tilde - 3f64.sqrt() * r).abs() < 1e-12 && (obs.d_hat - r).abs() < 1e-12);
    assert_eq!(obs.d_min, obs.d_hat);
    assert!((obs.d_mod - r).abs() < 1e-12);
    assert_eq!(obs.csv_values().len(), CSV_COLUMNS.len());
}

#[test]
fn orthogonal_and_collinear_directions() {
    let k = kernel(3);
    let z0 = vec![0.0; 3];
    let ortho = frame(vec![z0.clone(), vec![10.0, 0.0, 0.0], vec![0.0, 11.0, 0.0], vec![0.0, 0.0, 12.0]]);
    let obs = frame_observables_with_l(&ortho, &k, 1.0, 10.0).unwrap();
    assert_eq!(obs.c.as_array(), [0.0; 3]);
    assert_eq!(obs.gram_a, 1.0);
    let line = frame(vec![z0, vec![10.0, 0.0, 0.0], vec![20.0, 0.0, 0.0], vec![30.0, 0.0, 0.0]]);
    let obs = frame_observables_with_l(&line, &k, 1.0, 10.0).unwrap();
    assert_eq!(obs.c.as_array(), [1.0; 3]);
    assert_eq!(obs.gram_a, 0.0);
    assert!(obs.cal_x.is_finite() && (obs.cal_x - 40.0 / 60.0).abs() < 1e-15);
}

#[test]
fn coincident_centers_are_degenerate() {
    let k = kernel(2);
    let cfg = frame(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]]);
    assert!(matches!(frame_observables_with_l(&cfg, &k, 1.0, 1.0), Err(Error::DegenerateFrame(_))));
    let wrong = SolitonConfiguration::new(2, vec![vec![0.0, 0.0], vec![9.0, 0.0]], vec![1, -1]).unwrap();
    assert!(frame_observables_with_l(&wrong, &k, 1.0, 1.0).is_err());
}

#[test]
fn heart_constant() {
    assert!((c_heart() - 0.359779013).abs() < 1e-9);
    assert!((c_heart().exp() - (4.0 + 3f64.sqrt()) / 4.0).abs() < 1e-15);
}

#[test]
fn mid3_reference_values() {
    assert_eq!(mid3(1.0, 2.0, 3.0), 2.0);
    assert_eq!(mid3(5.0, 5.0, 1.0), 5.0);
    assert_eq!(mid3(-2.5, -2.5, -2.5), -2.5);
}

#[test]
fn gram_package_reference_points() {
    let g = gram_package(GramAngles::new(-0.5, -0.5, -0.5));
    assert!((g.cal_d - 6.25).abs() < 1e-14 && (g.cal_n - 1.5).abs() < 1e-14);
    assert!(g.b.iter().zip(&g.a_tilde).all(|(b, a)| (b - 1.0).abs() < 1e-14 && a.abs() < 1e-14));
    let g = gram_package(GramAngles::new(0.0, 0.0, 0.0));
    assert_eq!((g.cal_d, g.b, g.cal_n), (8.0, [0.5; 3], 8.0));
    let g = gram_package(GramAngles::new(1.0, 1.0, 1.0));
    assert_eq!((g.cal_d, g.b), (4.0, [0.25; 3]));
}

#[test]
fn angle_coefficients_reference_points() {
    assert!(angle_ode_coefficients(GramAngles::new(-0.5, -0.5, -0.5)).iter().all(|x| x.abs() < 1e-15));
    for c in [-0.9, -0.3, 0.2, 0.8] {
        assert_eq!(angle_ode_coefficients(GramAngles::new(1.0, c, c))[0], 0.0);
    }
}

#[test]
fn xi_map_is_well_conditioned() {
    let mut m = DMatrix::<f64>::zeros(6, 6);
    for j in 0..6 {
        let mut a = [0.0; 3];
        let mut d = [0.0; 3];
        if j < 3 {
            a[j] = 1.0;
        } else {
            d[j - 3] = 1.0;
        }
        let xi = xi_from(a, d);
        for i in 0..3 {
            m[(i, j)] = xi[i];
            m[(i + 3, j)] = d[i];
        }
    }
    let sv = m.singular_values();
    let cond = sv.max() / sv.min();
    assert!(cond < 10.0, "condition number {cond}");
}

#[test]
fn lyapunov_vanishes_at_zero_offset() {
    assert_eq!(lyapunov_value([0.3, 1.0, 2.0], [0.0; 3]), 0.0);
}

#[test]
fn small_suites_pass_in_two_and_three_dimensions() {
    for d in [2, 3] {
        let r = gram_inequality_suite(20_000, 7, d).unwrap();
        assert!(r.worst_margins.values().all(|m| *m >= -1e-10));
        assert!(r.quadratic_form_checks > 0);
        assert!(r.worst_margins["det_lower"] >= -1e-12);
    }
    assert!(gram_inequality_suite(0, 1, 3).is_err());
    assert!(gram_inequality_suite(10, 1, 4).is_err());
}

#[test]
fn inequality_reference_points() {
    let eq = GramAngles::new(-0.5, -0.5, -0.5);
    let g = gram_package(eq);
    let hi = -0.5f64;
    let lhs = g.cal_n - hi * hi + 2.0 * hi - hi * hi;
    assert!((lhs - 2.0 / 3.0 * (hi + 0.5)).abs() < 1e-15);
    let frak: f64 = 1.5;
    assert!(0.25 * frak <= 0.5 && 0.5 <= frak);
}

#[test]
fn equilateral_triangle_margins() {
    let m = 1e8;
    let s1 = [0.0, 0.0];
    let s2 = [m, 0.0];
    let s3 = [m / 2.0, m * 3f64.sqrt() / 2.0];
    let r = triangle_angle_bounds(&s1, &s2, &s3, m).unwrap();
    let eps = 5.0 * m.powf(-0.01);
    for margin in r.case1.unwrap() {
        assert!((margin - eps).abs() < 1e-7);
    }
}

#[test]
fn isosceles_triangle_satisfies_the_near_equal_bounds() {
    let m: f64 = 1e8;
    let base = m + m.powf(0.99);
    let h = (m * m - base * base / 4.0).sqrt();
    let s1 = [0.0, h];
    let s2 = [-base / 2.0, 0.0];
    let s3 = [base / 2.0, 0.0];
    let r = triangle_angle_bounds(&s1, &s2, &s3, m).unwrap();
    assert!(r.case1.unwrap().iter().all(|x| *x > 0.0));
}

#[test]
fn collinear_triangle_meets_the_apex_bound() {
    let m = 1e8;
    let r = triangle_angle_bounds(&[m], &[0.0], &[2.0 * m], m).unwrap();
    let eps = 5.0 * m.powf(-0.01);
    assert!((r.case2.unwrap() - (0.5 + eps)).abs() < 1e-9);
    assert!(matches!(triangle_angle_bounds(&[0.0], &[1.0], &[5.0], 1e8), Err(Error::HypothesisUnmet)));
}

fn unit_vectors(d: usize) -> impl Strategy<Value = [Vec<f64>; 3]> {
    prop::array::uniform3(prop::collection::vec(-1.0f64..1.0, d))
        .prop_filter("nonzero", |v| v.iter().all(|x| x.iter().map(|y| y * y).sum::<f64>() > 1e-6))
        .prop_map(|v| {
            v.map(|x| {
                let n = x.iter().map(|y| y * y).sum::<f64>().sqrt();
                x.into_iter().map(|y| y / n).collect()
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn mid3_is_permutation_invariant(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3) {
        let m = mid3(a, b, c);
        for v in [mid3(a, c, b), mid3(b, a, c), mid3(b, c, a), mid3(c, a, b), mid3(c, b, a)] {
            prop_assert!((v - m).abs() <= 1e-12 * (a.abs() + b.abs() + c.abs()));
        }
        let mut s = [a, b, c];
        s.sort_by(f64::total_cmp);
        prop_assert!((m - s[1]).abs() <= 1e-12 * (a.abs() + b.abs() + c.abs()));
    }

    #[test]
    fn gram_package_solves_its_system(u in unit_vectors(3)) {
        let c = GramAngles::from_units(&u[0], &u[1], &u[2]);
        prop_assert!(c.gram_determinant() >= -1e-12);
        let g = gram_package(c);
        let m = c.c_matrix();
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        prop_assert!((g.cal_d - det).abs() <= 1e-12);
        prop_assert!(g.cal_d >= 4.0 - 1e-12 && g.cal_d <= 10.0 + 1e-12);
        for mi in &m {
            let row: f64 = mi.iter().zip(&g.b).map(|(a, b)| a * b).sum();
            prop_assert!((row - 1.0).abs() <= 1e-12);
        }
        prop_assert_eq!(gram_package(c), g);
    }

    #[test]
    fn max_angle_coefficient_is_positive(u in unit_vectors(2)) {
        let c = GramAngles::from_units(&u[0], &u[1], &u[2]);
        let arr = c.as_array();
        let (k, hi) = arr.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, x)| if x > acc.1 { (i, x) } else { acc });
        prop_assume!(hi > -0.5 + 1e-9 && hi < 1.0 - 1e-9);
        let coef = angle_ode_coefficients(c)[k];
        let bound = 2.0 / 3.0 * (hi + 0.5) * (1.0 - hi) / gram_package(c).cal_d;
        prop_assert!(coef >= bound - 1e-12 && bound > 0.0);
    }

    #[test]
    fn lyapunov_is_comparable_to_a_weighted_square(u in unit_vectors(3), z in prop::array::uniform3(-1.0f64..1.0)) {
        prop_assume!(z.iter().any(|x| x.abs() > 1e-6));
        let b = gram_package(GramAngles::from_units(&u[0], &u[1], &u[2])).b;
        let l = lyapunov_value(b, z);
        let q: f64 = (0..3).map(|k| b[k] * z[k] * z[k] / 2.0).sum();
        prop_assert!(l >= 0.0);
        prop_assert!(l / q >= 0.6 && l / q <= 1.5, "ratio {}", l / q);
    }

    #[test]
    fn frame_invariants_hold(seed in 0u64..10_000, eps in 0.0f64..0.3, l in 5.0f64..30.0, d in 2usize..4) {
        let k = kernel(d);
        let cfg = perturbed_equilateral(d, 15.0, eps, seed).unwrap();
        let obs = frame_observables_with_l(&cfg, &k, 3.0, l).unwrap();
        prop_assert!(obs.gram_a >= 0.0);
        prop_assert_eq!(obs.d_min, obs.d_tilde.min(obs.d_hat));
        prop_assert!(obs.d.iter().sum::<f64>() >= -1e-12);
        prop_assert!(obs.lyapunov >= 0.0);
        let p = lyapunov_package(&obs);
        prop_assert_eq!(p.xi, xi_from(obs.a, obs.d));
        prop_assert_eq!(frame_observables_with_l(&cfg, &k, 3.0, l).unwrap(), obs);
    }
}
