//! Sphere measures and the large-argument expansion of the modified Bessel function K.

use std::f64::consts::PI;

/// Gamma function at positive half-integers n/2.
pub fn gamma_half(n: usize) -> f64 {
    assert!(n >= 1);
    if n.is_multiple_of(2) {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Surface measure of the unit sphere S^{n-1} in R^n; |S^0| = 2 counts two points.
pub fn sphere_measure(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Correction factor S_nu(r) with K_nu(r) = sqrt(pi/(2r)) e^{-r} S_nu(r).
///
/// Sums the asymptotic series up to its smallest term; the series terminates
/// when nu is a half-integer.
pub fn bessel_k_series(nu: f64, r: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let terminating = (2.0 * nu).fract() == 0.0 && (2.0 * nu) as i64 % 2 != 0;
    let inv = 1.0 / (8.0 * r);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..80 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * (mu - odd * odd) * inv / kf;
        if next == 0.0 {
            break;
        }
        if !terminating && next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_measures() {
        assert_eq!(sphere_measure(1), 2.0);
        assert!((sphere_measure(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_measure(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_measure(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_measure(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn half_integer_series_terminate() {
        assert_eq!(bessel_k_series(0.5, 3.0), 1.0);
        assert!((bessel_k_series(1.5, 4.0) - 1.25).abs() < 1e-16);
        assert!((bessel_k_series(2.5, 2.0) - (1.0 + 3.0 / 2.0 + 3.0 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn k0_against_integral_representation() {
        // e^r K_0(r) = int_0^inf exp(-r (cosh u - 1)) du
        for &r in &[12.0, 15.0, 25.0] {
            let reference = crate::quadrature::integrate(
                |u: f64| (-r * (u.cosh() - 1.0)).exp(),
                0.0,
                12.0,
                &crate::quadrature::QuadOptions { rel_tol: 1e-13, ..Default::default() },
            )
            .unwrap();
            let series = (PI / (2.0 * r)).sqrt() * bessel_k_series(0.0, r);
            assert!((series / reference - 1.0).abs() < 1e-9, "r={r}");
        }
    }
}
