//! Sampling checks of the inequalities satisfied on the Gram-feasible set, and
//! angle bounds for triangles with large sides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{angle_ode_coefficients, dot, gram_package, mid3, GramAngles};
use crate::error::{Error, Result};

/// Margins below this count as violations.
pub const VIOLATION_SLACK: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub d: usize,
    pub samples: usize,
    pub seed: u64,
    /// Number of (triple, x) pairs used for the quadratic form bound.
    pub quadratic_form_checks: usize,
    /// Smallest margin seen per inequality; every entry is ≥ VIOLATION_SLACK.
    pub worst_margins: BTreeMap<String, f64>,
}

/// Margins of every inequality at one triple; non-negative means satisfied.
pub fn triple_margins(c: GramAngles) -> Vec<(&'static str, f64)> {
    let g = gram_package(c);
    let [c12, c13, c23] = c.as_array();
    let cm = c.c_matrix();
    let resid = (0..3).map(|i| ((0..3).map(|j| cm[i][j] * g.b[j]).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let hi = c12.max(c13).max(c23);
    let lo = c12.min(c13).min(c23);
    let mid = mid3(c12, c13, c23);
    let dd = [c12 + 0.5, c13 + 0.5, c23 + 0.5];
    let frak = dd.iter().map(|x| x.abs()).sum::<f64>();
    let dmax = dd[0].max(dd[1]).max(dd[2]);
    let pair_excess = (2.0 + c23 - c12 - c13).min(2.0 + c13 - c12 - c23).min(2.0 + c12 - c13 - c23);
    let coef = angle_ode_coefficients(c);
    let kmax = if c12 >= c13 && c12 >= c23 {
        0
    } else if c13 >= c23 {
        1
    } else {
        2
    };
    let coef_margin = if hi > -0.5 { coef[kmax] - 2.0 / 3.0 * (hi + 0.5) * (1.0 - hi) / g.cal_d } else { 0.0 };
    vec![
        ("gram_determinant", c.gram_determinant()),
        ("det_lower", g.cal_d - 4.0),
        ("det_upper", 10.0 - g.cal_d),
        ("weight_lower", g.b.iter().copied().fold(f64::INFINITY, f64::min) - 1.0 / 20.0),
        ("weight_upper", 15.0 / 4.0 - g.b.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        ("weight_residual", 1e-12 - resid),
        ("pair_excess", pair_excess - 0.5),
        ("max_angle_growth", g.cal_n - hi * hi + 2.0 * hi - mid * lo - 2.0 / 3.0 * (hi + 0.5)),
        ("max_angle_coefficient", coef_margin),
        ("defect_sum", dd.iter().sum::<f64>()),
        ("defect_max_lower", dmax - frak / 4.0),
        ("defect_max_upper", frak - dmax),
    ]
}

/// Draws `samples` unit-vector triples on S^{d-1} and checks every inequality.
///
/// For one triple in every thousand, the quadratic form bound x·Cx ≥ |x|² is
/// checked on a thousand Gaussian vectors x.
pub fn gram_inequality_suite(samples: usize, seed: u64, d: usize) -> Result<InequalityReport> {
    if samples == 0 {
        return Err(Error::InvalidParams("samples must be at least 1".into()));
    }
    if !(2..=3).contains(&d) {
        return Err(Error::InvalidParams(format!("inequality suite runs in d = 2 or 3, got {d}")));
    }
    let mut rng = crate::rng::seeded(seed);
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    let mut qf_checks = 0;
    for n in 0..samples {
        let u1 = crate::rng::unit_sphere(&mut rng, d);
        let u2 = crate::rng::unit_sphere(&mut rng, d);
        let u3 = crate::rng::unit_sphere(&mut rng, d);
        let c = GramAngles::from_units(&u1, &u2, &u3);
        let mut margins = triple_margins(c);
        if n % 1000 == 0 {
            let cm = c.c_matrix();
            let mut m = f64::INFINITY;
            for _ in 0..1000 {
                let (x0, x1) = crate::rng::normal_pair(&mut rng);
                let (x2, _) = crate::rng::normal_pair(&mut rng);
                let x = [x0, x1, x2];
                let cx: Vec<f64> = (0..3).map(|i| dot(&cm[i], &x)).collect();
                let xx = dot(&x, &x);
                m = m.min((dot(&x, &cx) - xx) / xx);
                qf_checks += 1;
            }
            margins.push(("quadratic_form", m));
        }
        for (name, m) in margins {
            if m < VIOLATION_SLACK || m.is_nan() {
                return Err(Error::InequalityViolated { name: name.to_string(), margin: m, witness: c.as_array() });
            }
            let e = worst.entry(name.to_string()).or_insert(f64::INFINITY);
            *e = e.min(m);
        }
    }
    Ok(InequalityReport { d, samples, seed, quadratic_form_checks: qf_checks, worst_margins: worst })
}

/// Which side-length hypotheses held and the margins of the corresponding bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleReport {
    pub m: f64,
    /// Bounds at ς1 (upper), ς2 and ς3 (lower) when all sides are near M.
    pub case1: Option<[f64; 3]>,
    /// Lower bound at ς3 when |ς1ς2| is near M and the other sides are at least about M.
    pub case2: Option<f64>,
}

/// Angle bounds ±5 M^{-1/100} around 1/2 for triangles with sides of size about M.
pub fn triangle_angle_bounds(s1: &[f64], s2: &[f64], s3: &[f64], m: f64) -> Result<TriangleReport> {
    if !(m > 1.0) || s1.len() != s2.len() || s2.len() != s3.len() {
        return Err(Error::InvalidParams("triangle check needs M > 1 and points of one dimension".into()));
    }
    let slack = m.powf(0.99);
    let eps = 5.0 * m.powf(-0.01);
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let cos_at = |apex: &[f64], a: &[f64], b: &[f64]| {
        let va: Vec<f64> = a.iter().zip(apex).map(|(x, y)| x - y).collect();
        let vb: Vec<f64> = b.iter().zip(apex).map(|(x, y)| x - y).collect();
        dot(&va, &vb) / (dot(&va, &va).sqrt() * dot(&vb, &vb).sqrt())
    };
    let (l12, l13, l23) = (dist(s1, s2), dist(s1, s3), dist(s2, s3));
    let near = |l: f64| (l - m).abs() <= slack;
    let above = |l: f64| l - m >= -slack;
    let case1 = (near(l12) && near(l13) && above(l23))
        .then(|| [eps - (cos_at(s1, s2, s3) - 0.5), cos_at(s2, s1, s3) - 0.5 + eps, cos_at(s3, s1, s2) - 0.5 + eps]);
    let case2 = (near(l12) && above(l13) && above(l23)).then(|| cos_at(s3, s1, s2) - 0.5 + eps);
    if case1.is_none() && case2.is_none() {
        return Err(Error::HypothesisUnmet);
    }
    let worst = case1.iter().flatten().chain(case2.iter()).copied().fold(f64::INFINITY, f64::min);
    if worst < 0.0 {
        return Err(Error::InequalityViolated { name: "triangle_angle".into(), margin: worst, witness: [l12, l13, l23] });
    }
    Ok(TriangleReport { m, case1, case2 })
}
